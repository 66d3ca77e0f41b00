use super::{check_lengths, MetricsError};

/// 1-based ranks with ties assigned their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(MetricsError::TooFewSamples { need: 2, got: a.len() });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Area under the ROC curve for detecting large errors (`|error| >
/// threshold`) by ranking on sigma, ties counted one half.
///
/// Computed in rank-sum (Mann-Whitney) form.
pub fn auroc(abs_errors: &[f64], sigmas: &[f64], threshold: f64) -> Result<f64, MetricsError> {
    check_lengths(abs_errors.len(), sigmas.len())?;
    let ranks = average_ranks(sigmas);
    let mut n_pos = 0usize;
    let mut rank_sum = 0.0;
    for (e, r) in abs_errors.iter().zip(&ranks) {
        if e.abs() > threshold {
            n_pos += 1;
            rank_sum += r;
        }
    }
    let n_neg = abs_errors.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let pos = n_pos as f64;
    let u = rank_sum - pos * (pos + 1.0) / 2.0;
    Ok(u / (pos * n_neg as f64))
}
