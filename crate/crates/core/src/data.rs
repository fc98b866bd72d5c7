//! Logit datasets, class priors, deterministic splitting and file formats.
//!
//! Two on-disk formats are supported:
//!
//! * CSV with header `label,f_0,...,f_{K-1}` for interchange.
//! * A little-endian binary format: magic `ECPL`, `u32` version (= 1),
//!   `u32` N, `u32` K, N `u32` labels, then N*K `f64` logits row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{permutation, streams, CounterRng};

pub const MAGIC: [u8; 4] = *b"ECPL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// An N x K matrix of logits with one integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    class_count: usize,
    labels: Vec<u32>,
    logits: Vec<f64>,
}

impl LogitDataset {
    pub fn new(class_count: usize, labels: Vec<u32>, logits: Vec<f64>) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {class_count}")));
        }
        if labels.is_empty() {
            return Err(Error::domain("dataset must contain at least one sample"));
        }
        if logits.len() != labels.len() * class_count {
            return Err(Error::domain(format!(
                "logit matrix has {} entries, expected {} x {}",
                logits.len(),
                labels.len(),
                class_count
            )));
        }
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite logit at row {}, column {}",
                i / class_count,
                i % class_count
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y as usize >= class_count) {
            return Err(Error::domain(format!(
                "label {y} at row {i} is out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            class_count,
            labels,
            logits,
        })
    }

    /// Build from per-row vectors; convenient in tests and examples.
    pub fn from_rows(class_count: usize, rows: &[(u32, Vec<f64>)]) -> Result<Self> {
        let mut labels = Vec::with_capacity(rows.len());
        let mut logits = Vec::with_capacity(rows.len() * class_count);
        for (y, row) in rows {
            if row.len() != class_count {
                return Err(Error::domain(format!(
                    "row has {} logits, expected {class_count}",
                    row.len()
                )));
            }
            labels.push(*y);
            logits.extend_from_slice(row);
        }
        Self::new(class_count, labels, logits)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.class_count;
        &self.logits[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.logits.chunks_exact(self.class_count)
    }

    /// New dataset made of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut labels = Vec::with_capacity(indices.len());
        let mut logits = Vec::with_capacity(indices.len() * self.class_count);
        for &i in indices {
            labels.push(self.labels[i]);
            logits.extend_from_slice(self.row(i));
        }
        Self::new(self.class_count, labels, logits)
    }

    /// Multiply every logit by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.class_count,
            self.labels.clone(),
            self.logits.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Class prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassPriors {
    p: Vec<f64>,
}

impl ClassPriors {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("priors must be non-empty"));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::domain("priors must be finite and non-negative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("priors sum to {total}, expected 1")));
        }
        Ok(Self { p })
    }

    pub fn uniform(class_count: usize) -> Self {
        Self {
            p: vec![1.0 / class_count as f64; class_count],
        }
    }

    /// Long-tailed priors `p_j ∝ exp(-lambda * j)`.
    pub fn exponential_decay(class_count: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("imbalance lambda must be >= 0, got {lambda}")));
        }
        if class_count == 0 {
            return Err(Error::domain("priors must be non-empty"));
        }
        let w: Vec<f64> = (0..class_count).map(|j| (-lambda * j as f64).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(Self {
            p: w.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.p[class]
    }

    /// Classes with zero probability.
    pub fn zero_classes(&self) -> Vec<usize> {
        self.p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for ClassPriors {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ClassPriors> for Vec<f64> {
    fn from(p: ClassPriors) -> Self {
        p.p
    }
}

/// Empirical priors together with the classes that never occur.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPriors {
    pub priors: ClassPriors,
    pub absent_classes: Vec<usize>,
}

pub fn empirical_priors(ds: &LogitDataset) -> EmpiricalPriors {
    let mut counts = vec![0usize; ds.class_count()];
    for &y in ds.labels() {
        counts[y as usize] += 1;
    }
    let n = ds.len() as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let absent_classes = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(k, _)| k)
        .collect();
    EmpiricalPriors {
        priors: ClassPriors { p },
        absent_classes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub calibration_fraction: f64,
    pub seed: u64,
}

/// Shuffle deterministically by `spec.seed` and cut into (calibration, test).
/// The calibration part receives `floor(N * fraction)` samples.
pub fn split_dataset(ds: &LogitDataset, spec: SplitSpec) -> Result<(LogitDataset, LogitDataset)> {
    let frac = spec.calibration_fraction;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::domain(format!("calibration fraction {frac} not in (0, 1)")));
    }
    let n = ds.len();
    let n_cal = (n as f64 * frac).floor() as usize;
    if n_cal == 0 || n_cal >= n {
        return Err(Error::domain(format!(
            "fraction {frac} of {n} samples leaves an empty part"
        )));
    }
    let perm = permutation(n, CounterRng::new(spec.seed, streams::SPLIT));
    let (cal_idx, test_idx) = perm.split_at(n_cal);
    Ok((ds.select(cal_idx)?, ds.select(test_idx)?))
}

// ---------------------------------------------------------------------------
// CSV

pub fn load_logits_csv(path: impl AsRef<Path>) -> Result<LogitDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_logits_csv(&text)
}

pub fn parse_logits_csv(text: &str) -> Result<LogitDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "label" {
        return Err(Error::Format(
            "header must be `label,f_0,...,f_{K-1}` with K >= 2".into(),
        ));
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("f_{k}") {
            return Err(Error::Format(format!(
                "header column {} is `{name}`, expected `f_{k}`",
                k + 1
            )));
        }
    }
    let class_count = header.len() - 1;

    let mut labels = Vec::new();
    let mut logits = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != class_count + 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", class_count + 1, record.len()),
            });
        }
        let label: u32 = record[0].trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("invalid label `{}`", &record[0]),
        })?;
        if label as usize >= class_count {
            return Err(Error::domain(format!(
                "label {label} at row {row} is out of range for {class_count} classes"
            )));
        }
        labels.push(label);
        for cell in record.iter().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("invalid number `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            logits.push(v);
        }
    }
    LogitDataset::new(class_count, labels, logits)
}

pub fn write_logits_csv(ds: &LogitDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, logits_csv_string(ds)).map_err(|e| Error::io(path, e))
}

pub fn logits_csv_string(ds: &LogitDataset) -> String {
    use std::fmt::Write;
    let mut out = String::from("label");
    for k in 0..ds.class_count() {
        let _ = write!(out, ",f_{k}");
    }
    out.push('\n');
    for (i, row) in ds.rows().enumerate() {
        let _ = write!(out, "{}", ds.labels()[i]);
        for v in row {
            // `{:?}` prints the shortest representation that round-trips.
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Binary

pub fn to_bytes(ds: &LogitDataset) -> Vec<u8> {
    let n = ds.len();
    let k = ds.class_count();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * n + 8 * n * k);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    for &y in ds.labels() {
        buf.extend_from_slice(&y.to_le_bytes());
    }
    for &v in ds.logits() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<LogitDataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Length {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:02x?}", &bytes[..4])));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = word(8) as usize;
    let k = word(12) as usize;
    let expected = HEADER_LEN + 4 * n + 8 * n * k;
    if bytes.len() != expected {
        return Err(Error::Length {
            expected,
            found: bytes.len(),
        });
    }
    let body = &bytes[HEADER_LEN..];
    let (label_bytes, logit_bytes) = body.split_at(4 * n);
    let labels = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let logits = logit_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LogitDataset::new(k, labels, logits)
}

pub fn serialize_dataset(ds: &LogitDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(ds)).map_err(|e| Error::io(path, e))
}

pub fn deserialize_dataset(path: impl AsRef<Path>) -> Result<LogitDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Load by extension: `.csv` as CSV, anything else as the binary format.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LogitDataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_logits_csv(path),
        _ => deserialize_dataset(path),
    }
}

pub fn save_dataset(ds: &LogitDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => write_logits_csv(ds, path),
        _ => serialize_dataset(ds, path),
    }
}
