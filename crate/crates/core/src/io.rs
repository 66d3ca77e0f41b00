//! File formats.
//!
//! Scalar streams are line-delimited JSON, one object per line, UTF-8:
//!
//! * records: `{"system_id": str, "e_pred": num, "e_true": num}`
//! * sigmas: `{"system_id": str, "sigma": num, "method": "distance"|"ensemble"|"external", "calibrated": bool}`
//! * trajectories: `{"system_id": str, "frames": [[num, ...], ...]}`
//!
//! Blank lines are ignored and unknown keys are rejected. Numbers are written
//! in shortest round-trip form.
//!
//! Latent matrices use a little-endian binary layout:
//!
//! ```text
//! "UQLT" | version u32 = 1 | dim u32 | n_systems u64
//! n_systems x ( id_len u16 | id bytes (UTF-8) | atom_count u32 )
//! sum(atom_count) x dim x f32
//! ```
//!
//! A distance index is `"UQIX" | version u32 = 1 | UQLT payload | n_means u64 |
//! n_means x dim x f32`, the second block holding per-system mean latents.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{DistanceIndex, EstimatorError};
use crate::model::{EnergyRecord, LatentMatrix, Method, ModelError, TrajectoryEnsemble, UncertaintyEstimate};

pub const LATENT_MAGIC: [u8; 4] = *b"UQLT";
pub const INDEX_MAGIC: [u8; 4] = *b"UQIX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate system_id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: sigma must be finite and >= 0, got {sigma}")]
    NegativeSigma { line: usize, sigma: f64 },
    #[error("line {line}: trajectory `{id}` has ragged member counts")]
    RaggedFrames { line: usize, id: String },
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("file truncated at byte {offset}: needed {needed} more bytes")]
    TruncatedFile { offset: usize, needed: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("byte {offset}: {message}")]
    Invalid { offset: usize, message: String },
    #[error("system_id `{0}` is longer than 65535 bytes")]
    IdTooLong(String),
    #[error(transparent)]
    Index(#[from] EstimatorError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Non-blank lines with their 1-based line numbers.
fn json_lines<R: BufRead, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<(usize, T)>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| FormatError::Parse { line: line_no, message: e.to_string() })?;
        out.push((line_no, value));
    }
    Ok(out)
}

fn check_new_id(seen: &mut HashSet<String>, id: &str, line: usize) -> Result<(), FormatError> {
    if !seen.insert(id.to_string()) {
        return Err(FormatError::DuplicateId { line, id: id.to_string() });
    }
    Ok(())
}

fn model_err(line: usize) -> impl FnOnce(ModelError) -> FormatError {
    move |e| FormatError::Parse { line, message: e.to_string() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    system_id: String,
    e_pred: f64,
    e_true: f64,
}

pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<EnergyRecord>, FormatError> {
    let mut seen = HashSet::new();
    json_lines::<_, RecordLine>(reader)?
        .into_iter()
        .map(|(line, r)| {
            check_new_id(&mut seen, &r.system_id, line)?;
            EnergyRecord::new(r.system_id, r.e_pred, r.e_true).map_err(model_err(line))
        })
        .collect()
}

pub fn encode_records<W: Write>(mut w: W, records: &[EnergyRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EnergyRecord>, FormatError> {
    parse_records(open(path.as_ref())?)
}

pub fn write_records(path: impl AsRef<Path>, records: &[EnergyRecord]) -> Result<(), FormatError> {
    write_file(path.as_ref(), |w| encode_records(w, records))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaLine {
    system_id: String,
    sigma: f64,
    method: Method,
    calibrated: bool,
}

pub fn parse_sigmas<R: BufRead>(reader: R) -> Result<Vec<UncertaintyEstimate>, FormatError> {
    let mut seen = HashSet::new();
    json_lines::<_, SigmaLine>(reader)?
        .into_iter()
        .map(|(line, s)| {
            check_new_id(&mut seen, &s.system_id, line)?;
            if !(s.sigma >= 0.0 && s.sigma.is_finite()) {
                return Err(FormatError::NegativeSigma { line, sigma: s.sigma });
            }
            UncertaintyEstimate::with_flag(s.system_id, s.sigma, s.method, s.calibrated).map_err(model_err(line))
        })
        .collect()
}

pub fn encode_sigmas<W: Write>(mut w: W, sigmas: &[UncertaintyEstimate]) -> std::io::Result<()> {
    for s in sigmas {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_sigmas(path: impl AsRef<Path>) -> Result<Vec<UncertaintyEstimate>, FormatError> {
    parse_sigmas(open(path.as_ref())?)
}

pub fn write_sigmas(path: impl AsRef<Path>, sigmas: &[UncertaintyEstimate]) -> Result<(), FormatError> {
    write_file(path.as_ref(), |w| encode_sigmas(w, sigmas))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryLine {
    system_id: String,
    frames: Vec<Vec<f64>>,
}

pub fn parse_trajectories<R: BufRead>(reader: R) -> Result<Vec<TrajectoryEnsemble>, FormatError> {
    let mut seen = HashSet::new();
    json_lines::<_, TrajectoryLine>(reader)?
        .into_iter()
        .map(|(line, t)| {
            check_new_id(&mut seen, &t.system_id, line)?;
            TrajectoryEnsemble::new(t.system_id, t.frames).map_err(|e| match e {
                ModelError::RaggedFrames { id, .. } => FormatError::RaggedFrames { line, id },
                other => model_err(line)(other),
            })
        })
        .collect()
}

pub fn encode_trajectories<W: Write>(mut w: W, trajectories: &[TrajectoryEnsemble]) -> std::io::Result<()> {
    for t in trajectories {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<TrajectoryEnsemble>, FormatError> {
    parse_trajectories(open(path.as_ref())?)
}

pub fn write_trajectories(path: impl AsRef<Path>, trajectories: &[TrajectoryEnsemble]) -> Result<(), FormatError> {
    write_file(path.as_ref(), |w| encode_trajectories(w, trajectories))
}

/// Bounds-checked little-endian reader over a byte slice.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::TruncatedFile { offset: self.bytes.len(), needed: n - self.remaining() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, count: u64) -> Result<Vec<f32>, FormatError> {
        let needed = count.checked_mul(4).and_then(|b| usize::try_from(b).ok()).ok_or(FormatError::TruncatedFile {
            offset: self.bytes.len(),
            needed: usize::MAX,
        })?;
        let raw = self.take(needed)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<(), FormatError> {
        let found: [u8; 4] = self.array()?;
        if found != magic {
            return Err(FormatError::BadMagic { expected: magic, found });
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::VersionUnsupported(version));
        }
        Ok(())
    }

    fn invalid(&self, message: impl Into<String>) -> FormatError {
        FormatError::Invalid { offset: self.pos, message: message.into() }
    }
}

fn put_latents(buf: &mut Vec<u8>, m: &LatentMatrix) -> Result<(), FormatError> {
    buf.extend_from_slice(&LATENT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.n_systems() as u64).to_le_bytes());
    for (id, &count) in m.system_ids().iter().zip(m.atom_counts()) {
        let len = u16::try_from(id.len()).map_err(|_| FormatError::IdTooLong(id.clone()))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
    }
    buf.reserve(m.data().len() * 4);
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn take_latents(cur: &mut Cursor<'_>) -> Result<LatentMatrix, FormatError> {
    cur.header(LATENT_MAGIC)?;
    let dim = cur.u32()?;
    if dim == 0 {
        return Err(cur.invalid("latent dim must be positive"));
    }
    let n_systems = cur.u64()?;
    // each system entry needs at least 6 bytes
    if n_systems > (cur.remaining() / 6) as u64 {
        return Err(FormatError::TruncatedFile { offset: cur.bytes.len(), needed: (n_systems as usize).saturating_mul(6) });
    }
    let mut ids = Vec::with_capacity(n_systems as usize);
    let mut counts = Vec::with_capacity(n_systems as usize);
    let mut rows = 0u64;
    for _ in 0..n_systems {
        let len = cur.u16()? as usize;
        let start = cur.pos;
        let raw = cur.take(len)?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| FormatError::Invalid { offset: start, message: "system id is not UTF-8".into() })?;
        ids.push(id.to_string());
        let count = cur.u32()?;
        rows += count as u64;
        counts.push(count);
    }
    let values = rows.checked_mul(dim as u64).ok_or_else(|| cur.invalid("row count overflows"))?;
    let data = cur.f32s(values)?;
    let offset = cur.pos;
    LatentMatrix::new(dim as usize, ids, counts, data).map_err(|e| FormatError::Invalid { offset, message: e.to_string() })
}

fn finish(cur: &Cursor<'_>) -> Result<(), FormatError> {
    match cur.remaining() {
        0 => Ok(()),
        n => Err(FormatError::TrailingBytes(n)),
    }
}

pub fn encode_latents(m: &LatentMatrix) -> Result<Vec<u8>, FormatError> {
    let mut buf = Vec::new();
    put_latents(&mut buf, m)?;
    Ok(buf)
}

pub fn decode_latents(bytes: &[u8]) -> Result<LatentMatrix, FormatError> {
    let mut cur = Cursor::new(bytes);
    let m = take_latents(&mut cur)?;
    finish(&cur)?;
    Ok(m)
}

pub fn read_latents(path: impl AsRef<Path>) -> Result<LatentMatrix, FormatError> {
    let path = path.as_ref();
    decode_latents(&std::fs::read(path).map_err(io_err(path))?)
}

pub fn write_latents(path: impl AsRef<Path>, m: &LatentMatrix) -> Result<(), FormatError> {
    let bytes = encode_latents(m)?;
    write_file(path.as_ref(), |w| w.write_all(&bytes))
}

pub fn encode_index(index: &DistanceIndex) -> Result<Vec<u8>, FormatError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&INDEX_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_latents(&mut buf, index.train())?;
    buf.extend_from_slice(&(index.n_systems() as u64).to_le_bytes());
    for v in index.system_means() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_index(bytes: &[u8]) -> Result<DistanceIndex, FormatError> {
    let mut cur = Cursor::new(bytes);
    cur.header(INDEX_MAGIC)?;
    let train = take_latents(&mut cur)?;
    let n_means = cur.u64()?;
    if n_means != train.n_systems() as u64 {
        return Err(cur.invalid(format!("{n_means} system means for {} systems", train.n_systems())));
    }
    let means = cur.f32s(n_means * train.dim() as u64)?;
    finish(&cur)?;
    Ok(DistanceIndex::from_parts(train, means)?)
}

pub fn read_index(path: impl AsRef<Path>) -> Result<DistanceIndex, FormatError> {
    let path = path.as_ref();
    decode_index(&std::fs::read(path).map_err(io_err(path))?)
}

pub fn write_index(path: impl AsRef<Path>, index: &DistanceIndex) -> Result<(), FormatError> {
    let bytes = encode_index(index)?;
    write_file(path.as_ref(), |w| w.write_all(&bytes))
}

/// Disjoint calibration and test positions into one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    /// Seeded random split of `n` systems; `round(n * calibration_fraction)`
    /// go to calibration. Both halves keep ascending order.
    pub fn random(n: usize, calibration_fraction: f64, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let k = ((n as f64 * calibration_fraction).round() as usize).min(n);
        let mut calibration = order[..k].to_vec();
        let mut test = order[k..].to_vec();
        calibration.sort_unstable();
        test.sort_unstable();
        Self { calibration, test }
    }
}
