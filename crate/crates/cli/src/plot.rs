//! Calibration plot (SVG) and bin table (CSV).

use std::fmt::Write;

use uqbench_core::calibration::CurvePoint;

pub const CSV_HEADER: &str = "rmv,rmse,ci_lo,ci_hi,count";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in curve {
        let _ = writeln!(out, "{},{},{},{},{}", p.rmv, p.rmse, p.ci_lo, p.ci_hi, p.count);
    }
    out
}

/// RMSE against RMV per bin with CI bars, the parity line and the fitted
/// line, on a shared axis range starting at zero.
pub fn calibration_svg(curve: &[CurvePoint], slope: f64, intercept: f64) -> String {
    let top = axis_max(curve);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + v / top * plot_w;
    let sy = |v: f64| TOP + plot_h - v / top * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="area"><rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}"/></clipPath></defs>"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(top), sy(top));
    let _ = writeln!(s, r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for i in 0..=TICKS {
        let v = top * i as f64 / TICKS as f64;
        let (x, y) = (sx(v), sy(v));
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(v)
        );
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">RMV (eV)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">RMSE (eV)</text>"#,
        TOP + plot_h / 2.0
    );

    let _ = writeln!(s, r#"<g clip-path="url(#area)">"#);
    let _ = writeln!(
        s,
        r##"<line class="parity" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#888888" stroke-dasharray="6 4"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line class="fit" x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}" stroke="#d62728"/>"##,
        sy(intercept),
        sy(slope * top + intercept)
    );
    for p in curve {
        let x = sx(p.rmv);
        let _ = writeln!(
            s,
            r##"<line class="ci" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#1f77b4"/>"##,
            sy(p.ci_lo),
            sy(p.ci_hi)
        );
        let _ = writeln!(
            s,
            r##"<circle class="bin" cx="{x:.2}" cy="{:.2}" r="3.5" fill="#1f77b4"><title>n={}</title></circle>"##,
            sy(p.rmse),
            p.count
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn axis_max(curve: &[CurvePoint]) -> f64 {
    let m = curve.iter().flat_map(|p| [p.rmv, p.rmse, p.ci_hi]).filter(|v| v.is_finite()).fold(0.0, f64::max);
    if m > 0.0 {
        m * 1.05
    } else {
        1.0
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}
