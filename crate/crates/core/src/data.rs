//! Datasets: synthetic Gaussian generation, CSV ingestion, stratified
//! splitting and per-epoch mini-batch ordering.
//!
//! All randomness comes from `ChaCha8Rng` streams derived from an explicit
//! seed, so every operation here is bit-reproducible.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature column"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                actual: features.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::invalid(format!("label {} at row {i}", labels[i])));
        }
        Ok(Dataset {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.len() - self.n_positive()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.n_positive() as f64 / self.len() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let n1 = self.n_positive();
        n1 > 0 && n1 < self.len()
    }

    /// Copies the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
        }
    }
}

/// Parameters of the two-Gaussian generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub dim: usize,
    pub n: usize,
    pub positive_fraction: f64,
    /// Euclidean distance between the two class means.
    pub mean_separation: f64,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dim: 20,
            n: 2000,
            positive_fraction: 0.1,
            mean_separation: 4.0,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

// stream ids for independent uses of the same seed
const STREAM_LAYOUT: u64 = 1;
const STREAM_FEATURES: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SAMPLE: u64 = 4;
const STREAM_SPLIT: u64 = 5;
const STREAM_BATCHES: u64 = 1 << 32;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "positive fraction must lie in (0, 1), got {}",
                self.positive_fraction
            )));
        }
        if !(self.mean_separation >= 0.0 && self.mean_separation.is_finite()) {
            return Err(Error::invalid("mean separation must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::invalid(format!(
                "noise rate must lie in [0, 1), got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }

    /// Number of positives before label noise, `n * positive_fraction` rounded half up.
    pub fn n_positive(&self) -> usize {
        round_half_up(self.n as f64 * self.positive_fraction)
    }

    fn class_mean(&self) -> f64 {
        self.mean_separation / 2.0 / (self.dim as f64).sqrt()
    }

    fn draw_row(&self, label: u8, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let m = if label == 1 {
            self.class_mean()
        } else {
            -self.class_mean()
        };
        for _ in 0..self.dim {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + z);
        }
    }

    pub fn with_seed(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            seed,
            ..self.clone()
        }
    }
}

/// Draws the dataset described by `spec`: exactly `spec.n_positive()`
/// positives at random positions, then independent label flips.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n1 = spec.n_positive();
    if n1 == 0 || n1 >= spec.n {
        return Err(Error::invalid(format!(
            "n={} with positive fraction {} does not contain both classes",
            spec.n, spec.positive_fraction
        )));
    }
    let mut labels: Vec<u8> = (0..spec.n).map(|i| u8::from(i < n1)).collect();
    labels.shuffle(&mut rng_for(spec.seed, STREAM_LAYOUT));

    let mut rng = rng_for(spec.seed, STREAM_FEATURES);
    let mut features = Vec::with_capacity(spec.n * spec.dim);
    for &y in &labels {
        spec.draw_row(y, &mut rng, &mut features);
    }

    let mut noise = rng_for(spec.seed, STREAM_NOISE);
    for y in labels.iter_mut() {
        if noise.random::<f64>() < spec.noise_rate {
            *y = 1 - *y;
        }
    }
    Dataset::new(features, labels, spec.dim)
}

/// Draws `n` i.i.d. samples from the generating distribution, with labels
/// Bernoulli(`positive_fraction`) and no label noise.
pub fn sample_iid(spec: &SynthSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_for(seed, STREAM_SAMPLE);
    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(rng.random::<f64>() < spec.positive_fraction);
        spec.draw_row(y, &mut rng, &mut features);
        labels.push(y);
    }
    Dataset::new(features, labels, spec.dim)
}

/// Draws `n` samples from one class-conditional distribution.
pub fn sample_class(spec: &SynthSpec, label: u8, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_for(seed, STREAM_SAMPLE + 1 + label as u64);
    let mut features = Vec::with_capacity(n * spec.dim);
    for _ in 0..n {
        spec.draw_row(label, &mut rng, &mut features);
    }
    Dataset::new(features, vec![label; n], spec.dim)
}

/// Reads a CSV with a header row whose final column is `label`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(Error::file(path))?;
    read_csv(file, path)
}

fn parse_error(path: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

pub(crate) fn read_csv(reader: impl Read, path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    match headers.iter().next_back() {
        Some(h) if h.trim() == "label" => {}
        _ => {
            return Err(parse_error(
                path,
                1,
                "label",
                "final header column must be named `label`",
            ))
        }
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::invalid(format!(
            "{}: no feature columns before `label`",
            path.display()
        )));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(parse_error(
                path,
                line,
                "*",
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (j, field) in record.iter().take(dim).enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                parse_error(path, line, &headers[j], format!("`{field}` is not numeric"))
            })?;
            features.push(value);
        }
        let label = match record[dim].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(parse_error(
                    path,
                    line,
                    "label",
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        labels.push(label);
    }
    Dataset::new(features, labels, dim)
}

pub fn write_csv(ds: &Dataset, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    wtr.write_record(&header)?;
    for (row, &y) in ds.rows().zip(ds.labels()) {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        fields.push(y.to_string());
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Stratified train/validation split. Each class contributes roughly
/// `val_fraction` of its rows to validation, and at least one row to each side.
pub fn split(ds: &Dataset, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let n = ds.len();
    let total_val = round_half_up(n as f64 * val_fraction);
    if total_val == 0 || total_val >= n {
        return Err(Error::invalid(format!(
            "validation fraction {val_fraction} of {n} rows leaves an empty split"
        )));
    }
    let mut pos: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == 0).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::degenerate(format!(
            "stratified split needs two rows per class, got {} positives and {} negatives",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = rng_for(seed, STREAM_SPLIT);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let pos_val = round_half_up(pos.len() as f64 * val_fraction).clamp(1, pos.len() - 1);
    let neg_val = total_val.saturating_sub(pos_val).clamp(1, neg.len() - 1);

    let mut val_idx: Vec<usize> = pos[..pos_val]
        .iter()
        .chain(&neg[..neg_val])
        .copied()
        .collect();
    let mut train_idx: Vec<usize> = pos[pos_val..]
        .iter()
        .chain(&neg[neg_val..])
        .copied()
        .collect();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((ds.subset(&train_idx), ds.subset(&val_idx)))
}

/// Index batches for one epoch: a fresh permutation derived from
/// `(seed, epoch)`, cut into chunks of `batch_size` with the tail kept.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, STREAM_BATCHES + epoch));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
