//! End-to-end training runs with per-epoch telemetry.
//!
//! A run splits the data (stratified), initialises a dense network, and
//! trains with momentum SGD over shuffled mini-batches. After every epoch the
//! full training set is re-scored: the loss and the F-beta scores for each
//! evaluation beta form one [`EpochRecord`] and one [`ScatterRow`] per beta,
//! which is the loss-versus-score path the correlation analysis works on.
//!
//! For synthetic data a third held-out set is drawn from the same generator
//! with a different seed and used for final test metrics; CSV sources reuse
//! the validation set.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, SynthSpec};
use crate::diagnostics::{gradient_condition_residual, GradientConditionReport};
use crate::error::{Error, Result};
use crate::losses::{batch_loss, ClassWeights, LossKind, LossSpec, PositivePrior};
use crate::metrics::{confusion, f_beta_from_confusion, smoothed_proportions};
use crate::model::{backward, Network, ParamVector};
use crate::optimizer::{self, OptimizerState, SgdConfig};
use crate::stats::{median, pearson, spearman};

/// Offset added to the synthetic seed to draw the held-out test set.
pub const TEST_SEED_OFFSET: u64 = 0x7E57;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthSpec),
    Csv(PathBuf),
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}
fn default_batch_size() -> usize {
    100
}
fn default_epochs() -> usize {
    120
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_eval_betas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Hidden layer widths; input width comes from the data, output is 1.
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    pub loss: LossSpec,
    #[serde(default)]
    pub sgd: SgdConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_betas")]
    pub eval_betas: Vec<f64>,
}

impl RunConfig {
    pub fn new(data: DataSource, loss: LossSpec) -> Self {
        RunConfig {
            data,
            hidden_layers: default_hidden(),
            loss,
            sgd: SgdConfig::default(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            val_fraction: default_val_fraction(),
            seed: 0,
            eval_betas: default_eval_betas(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(Error::file(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if self.eval_betas.is_empty() || self.eval_betas.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return Err(Error::invalid(
                "eval betas must be a non-empty list of positive values",
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    fn shape(&self, dim: usize) -> Vec<usize> {
        let mut shape = vec![dim];
        shape.extend(&self.hidden_layers);
        shape.push(1);
        shape
    }
}

/// Metrics recorded after each epoch. `loss` is the run's loss on the full
/// training set at the end of the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// One entry per evaluation beta, in configuration order.
    pub f_beta_train: Vec<f64>,
    pub f_beta_val: Vec<f64>,
    pub acc_val: f64,
    pub q0_tilde: f64,
    pub q1_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub epoch: usize,
    pub beta: f64,
    pub loss: f64,
    pub f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub n: usize,
    pub f_beta: Vec<(f64, f64)>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl SetMetrics {
    fn evaluate(net: &Network, ds: &Dataset, betas: &[f64]) -> Result<Self> {
        let c = confusion(&net.predict(ds)?, ds.labels())?;
        Ok(SetMetrics {
            n: ds.len(),
            f_beta: betas
                .iter()
                .map(|&b| Ok((b, f_beta_from_confusion(&c, b)?)))
                .collect::<Result<_>>()?,
            accuracy: c.accuracy(),
            precision: c.precision(),
            recall: c.recall(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    /// Held-out synthetic test set; `None` for CSV sources.
    pub test: Option<Dataset>,
}

impl PreparedData {
    pub fn eval_set(&self) -> &Dataset {
        self.test.as_ref().unwrap_or(&self.val)
    }
}

pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let (full, test) = match &cfg.data {
        DataSource::Synth(spec) => {
            let test_spec = spec.with_seed(spec.seed.wrapping_add(TEST_SEED_OFFSET));
            (data::generate(spec)?, Some(data::generate(&test_spec)?))
        }
        DataSource::Csv(path) => (data::load_csv(path)?, None),
    };
    let (train, val) = data::split(&full, cfg.val_fraction, cfg.seed)?;
    Ok(PreparedData { train, val, test })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EpochRecord>,
    pub scatter: Vec<ScatterRow>,
    pub network: Network,
    /// Parameters after each epoch.
    pub trajectory: Vec<ParamVector>,
    /// Loss with `p=auto` replaced by the training positive fraction.
    pub loss: LossSpec,
    /// Macro-soft batches holding a single class, which carry no gradient.
    pub skipped_batches: usize,
    pub data: PreparedData,
}

struct Scorer<'a> {
    loss: LossSpec,
    weights: ClassWeights,
    betas: &'a [f64],
}

impl Scorer<'_> {
    fn record(&self, epoch: usize, net: &Network, data: &PreparedData) -> Result<EpochRecord> {
        let train_scores = net.predict(&data.train)?;
        let labels = data.train.labels();
        let loss = batch_loss(&self.loss, &train_scores, labels, &self.weights)?;
        let train_counts = confusion(&train_scores, labels)?;
        let val_counts = confusion(&net.predict(&data.val)?, data.val.labels())?;
        let sp = smoothed_proportions(&train_scores, labels)?;
        Ok(EpochRecord {
            epoch,
            loss,
            f_beta_train: self
                .betas
                .iter()
                .map(|&b| f_beta_from_confusion(&train_counts, b))
                .collect::<Result<_>>()?,
            f_beta_val: self
                .betas
                .iter()
                .map(|&b| f_beta_from_confusion(&val_counts, b))
                .collect::<Result<_>>()?,
            acc_val: val_counts.accuracy(),
            q0_tilde: sp.q0_tilde,
            q1_tilde: sp.q1_tilde,
        })
    }
}

fn scatter_rows(record: &EpochRecord, betas: &[f64]) -> Vec<ScatterRow> {
    betas
        .iter()
        .zip(&record.f_beta_train)
        .map(|(&beta, &f_beta)| ScatterRow {
            epoch: record.epoch,
            beta,
            loss: record.loss,
            f_beta,
        })
        .collect()
}

fn training_setup(cfg: &RunConfig, data: &PreparedData) -> Result<(LossSpec, ClassWeights)> {
    let loss = cfg.loss.resolved(data.train.positive_fraction());
    let weights = match loss.kind {
        LossKind::MacroSoft { .. } => ClassWeights::uniform(),
        _ => ClassWeights::for_spec(&loss, data.train.labels())?,
    };
    Ok((loss, weights))
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    run_prepared(cfg, data)
}

/// Trains on already prepared data; deterministic given `cfg.seed`.
pub fn run_prepared(cfg: &RunConfig, data: PreparedData) -> Result<RunOutput> {
    let (loss, weights) = training_setup(cfg, &data)?;
    let mut net = Network::init(&cfg.shape(data.train.dim()), cfg.seed)?;
    let mut state = OptimizerState::new(net.param_count());
    let scorer = Scorer {
        loss,
        weights,
        betas: &cfg.eval_betas,
    };

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut scatter = Vec::with_capacity(cfg.epochs * cfg.eval_betas.len());
    let mut trajectory = Vec::with_capacity(cfg.epochs);
    let mut skipped_batches = 0;
    for epoch in 0..cfg.epochs {
        let order = data::batches(data.train.len(), cfg.batch_size, cfg.seed, epoch as u64);
        for (b, idx) in order.iter().enumerate() {
            let batch = data.train.subset(idx);
            let grad = match backward(&net, &batch, &loss, &weights) {
                Ok((_, grad)) => grad,
                Err(e) if e.is_degenerate_class() && !loss.is_per_sample() => {
                    skipped_batches += 1;
                    continue;
                }
                Err(e) => {
                    return Err(Error::InRun {
                        epoch: epoch + 1,
                        batch: b,
                        source: Box::new(e),
                    })
                }
            };
            let (params, next) = optimizer::step(&net.params(), &grad, &state, &cfg.sgd)?;
            net.set_params(&params)?;
            state = next;
        }
        let record = scorer
            .record(epoch + 1, &net, &data)
            .map_err(|e| Error::InRun {
                epoch: epoch + 1,
                batch: order.len(),
                source: Box::new(e),
            })?;
        scatter.extend(scatter_rows(&record, &cfg.eval_betas));
        records.push(record);
        trajectory.push(net.params());
    }

    Ok(RunOutput {
        records,
        scatter,
        network: net,
        trajectory,
        loss,
        skipped_batches,
        data,
    })
}

/// Runs `repeats` copies of `cfg` with seeds `cfg.seed + r`, in parallel.
pub fn run_repeats(cfg: &RunConfig, repeats: usize) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(r);
            run(&c)
        })
        .collect()
}

/// Re-scores saved per-epoch parameters against possibly new betas.
pub fn scatter_from_trajectory(
    cfg: &RunConfig,
    trajectory: &[ParamVector],
    betas: &[f64],
) -> Result<Vec<ScatterRow>> {
    let data = prepare_data(cfg)?;
    let (loss, weights) = training_setup(cfg, &data)?;
    let scorer = Scorer {
        loss,
        weights,
        betas,
    };
    let mut net = Network::zeros(&cfg.shape(data.train.dim()))?;
    let mut rows = Vec::new();
    for (e, params) in trajectory.iter().enumerate() {
        net.set_params(params)?;
        let record = scorer.record(e + 1, &net, &data)?;
        rows.extend(scatter_rows(&record, betas));
    }
    Ok(rows)
}

/// Scatter rows belonging to one beta.
pub fn rows_for_beta(rows: &[ScatterRow], beta: f64) -> Vec<ScatterRow> {
    rows.iter().copied().filter(|r| r.beta == beta).collect()
}

/// Pearson correlation between loss and F-beta along a run. All rows must
/// share one beta.
pub fn correlation(rows: &[ScatterRow]) -> Result<f64> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.beta != first.beta) {
            return Err(Error::invalid("scatter rows mix several betas"));
        }
    }
    let loss: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let score: Vec<f64> = rows.iter().map(|r| r.f_beta).collect();
    pearson(&loss, &score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub repeats: usize,
    pub recall: f64,
    pub precision: f64,
    pub f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Spearman correlation of median recall with beta; `None` if undefined.
    pub recall_trend: Option<f64>,
    pub precision_trend: Option<f64>,
}

/// Trains the surrogate loss once per beta (times `repeats` seeds) and
/// reports median final recall, precision and F-beta on the evaluation set.
pub fn sweep_beta(base: &RunConfig, betas: &[f64], repeats: usize) -> Result<SweepTable> {
    if betas.is_empty() {
        return Err(Error::invalid("beta sweep needs at least one beta"));
    }
    if repeats == 0 {
        return Err(Error::invalid("beta sweep needs at least one repeat"));
    }
    let prior = match base.loss.kind {
        LossKind::Surrogate { p, .. } | LossKind::Generalized { p, .. } => p,
        _ => PositivePrior::Auto,
    };
    let jobs: Vec<(usize, u64)> = (0..betas.len())
        .flat_map(|i| (0..repeats as u64).map(move |r| (i, r)))
        .collect();
    let finals: Vec<SetMetrics> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let mut cfg = base.clone();
            cfg.loss = LossSpec {
                kind: LossKind::Surrogate {
                    beta: betas[i],
                    p: prior,
                },
                class_balanced: base.loss.class_balanced,
            };
            cfg.seed = base.seed.wrapping_add(r);
            cfg.validate()?;
            let out = run(&cfg)?;
            SetMetrics::evaluate(&out.network, out.data.eval_set(), &[betas[i]])
        })
        .collect::<Result<_>>()?;

    let rows: Vec<SweepRow> = betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let runs = &finals[i * repeats..(i + 1) * repeats];
            let pick = |f: fn(&SetMetrics) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
            SweepRow {
                beta,
                repeats,
                recall: pick(|m| m.recall),
                precision: pick(|m| m.precision),
                f_beta: pick(|m| m.f_beta[0].1),
            }
        })
        .collect();
    let col = |f: fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(SweepTable {
        recall_trend: spearman(betas, &col(|r| r.recall)).ok(),
        precision_trend: spearman(betas, &col(|r| r.precision)).ok(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCorrelation {
    pub beta: f64,
    /// `None` when the series is too short or constant.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub loss: String,
    pub epochs: usize,
    pub skipped_batches: usize,
    /// Which split the `test` metrics were computed on.
    pub test_source: String,
    pub train: Option<SetMetrics>,
    pub val: Option<SetMetrics>,
    pub test: Option<SetMetrics>,
    pub correlation: Vec<BetaCorrelation>,
    /// Gradient condition at the final parameters for BCE, MAE and surrogate runs.
    pub gradient_condition: Option<GradientConditionReport>,
}

pub fn summarize(cfg: &RunConfig, out: &RunOutput) -> Result<Summary> {
    let betas = &cfg.eval_betas;
    let trained = !out.records.is_empty();
    let metrics = |ds: &Dataset| -> Result<Option<SetMetrics>> {
        if trained {
            SetMetrics::evaluate(&out.network, ds, betas).map(Some)
        } else {
            Ok(None)
        }
    };
    let gradient_condition = match out.loss.kind {
        LossKind::Bce | LossKind::Mae | LossKind::Surrogate { .. } if trained => Some(
            gradient_condition_residual(&out.network, &out.data.train, &out.loss.balanced())?,
        ),
        _ => None,
    };
    Ok(Summary {
        loss: out.loss.to_string(),
        epochs: out.records.len(),
        skipped_batches: out.skipped_batches,
        test_source: if out.data.test.is_some() {
            format!("synthetic held-out set, generator seed offset by {TEST_SEED_OFFSET}")
        } else {
            "validation set (csv source has no separate test set)".into()
        },
        train: metrics(&out.data.train)?,
        val: metrics(&out.data.val)?,
        test: metrics(out.data.eval_set())?,
        correlation: betas
            .iter()
            .map(|&beta| BetaCorrelation {
                beta,
                pearson: correlation(&rows_for_beta(&out.scatter, beta)).ok(),
            })
            .collect(),
        gradient_condition,
    })
}

/// Formats with 9 significant digits, trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-5..9).contains(&exp) {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').expect("exponent present");
        format!("{}e{e}", trim(mantissa.to_string()))
    } else {
        trim(format!("{:.*}", (8 - exp) as usize, x))
    }
}

pub fn beta_label(beta: f64) -> String {
    format!("{beta}")
}

pub fn write_records_csv(records: &[EpochRecord], betas: &[f64], mut w: impl Write) -> Result<()> {
    let mut header = vec!["epoch".to_string(), "loss".to_string()];
    for &b in betas {
        header.push(format!("f{}_train", beta_label(b)));
        header.push(format!("f{}_val", beta_label(b)));
    }
    header.extend(["acc_val", "q0_tilde", "q1_tilde"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        let mut fields = vec![r.epoch.to_string(), format_number(r.loss)];
        for (t, v) in r.f_beta_train.iter().zip(&r.f_beta_val) {
            fields.push(format_number(*t));
            fields.push(format_number(*v));
        }
        fields.extend([r.acc_val, r.q0_tilde, r.q1_tilde].map(format_number));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_scatter_csv(rows: &[ScatterRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "epoch,beta,loss,f_beta")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.epoch,
            beta_label(r.beta),
            format_number(r.loss),
            format_number(r.f_beta)
        )?;
    }
    Ok(())
}

pub const CONFIG_FILE: &str = "config.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAJECTORY_FILE: &str = "trajectory.json";

/// Files written by [`write_run`], relative to the output directory.
pub const RUN_FILES: [&str; 6] = [
    CONFIG_FILE,
    RECORDS_FILE,
    SCATTER_FILE,
    SUMMARY_FILE,
    CHECKPOINT_FILE,
    TRAJECTORY_FILE,
];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// Writes the configuration, telemetry, summary, final checkpoint and the
/// per-epoch parameter trajectory into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let mut w = create(&dir.join(RECORDS_FILE))?;
    write_records_csv(&out.records, &cfg.eval_betas, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(SCATTER_FILE))?;
    write_scatter_csv(&out.scatter, &mut w)?;
    w.flush()?;
    write_json(&dir.join(SUMMARY_FILE), &summarize(cfg, out)?)?;
    out.network.save(dir.join(CHECKPOINT_FILE))?;
    write_json(&dir.join(TRAJECTORY_FILE), &out.trajectory)?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<ParamVector>> {
    let path = path.as_ref();
    Ok(serde_json::from_str(
        &fs::read_to_string(path).map_err(Error::file(path))?,
    )?)
}
