use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use fbeta_core::experiment::DataSource;
use fbeta_core::{LossSpec, RunConfig, SgdConfig, SynthSpec};

pub const DEFAULT_LOSS: &str = "surrogate(beta=1.0,p=auto),balanced";
pub const DEFAULT_SYNTH: &str = "n=2000,dim=20,pos=0.1,sep=4,noise=0,seed=0";

/// Synthetic data description given as `key=value` pairs separated by commas.
/// Keys: n, dim, pos, sep, noise, seed. Missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthArg(pub SynthSpec);

impl FromStr for SynthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut spec = SynthSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let bad = |e: &dyn std::fmt::Display| format!("bad value `{value}` for `{key}`: {e}");
            match key.trim() {
                "n" => spec.n = value.parse().map_err(|e| bad(&e))?,
                "dim" => spec.dim = value.parse().map_err(|e| bad(&e))?,
                "pos" => spec.positive_fraction = value.parse().map_err(|e| bad(&e))?,
                "sep" => spec.mean_separation = value.parse().map_err(|e| bad(&e))?,
                "noise" => spec.noise_rate = value.parse().map_err(|e| bad(&e))?,
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                other => {
                    return Err(format!(
                        "unknown key `{other}` (expected n, dim, pos, sep, noise or seed)"
                    ))
                }
            }
        }
        Ok(SynthArg(spec))
    }
}

pub fn parse_loss(s: &str) -> Result<LossSpec, String> {
    s.parse::<LossSpec>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Synthetic Gaussian data: comma-separated key=value pairs with keys
    /// n, dim, pos (positive fraction), sep (mean separation), noise (label-flip rate), seed
    #[arg(long, value_name = "SPEC", default_value = DEFAULT_SYNTH, conflicts_with = "csv")]
    pub synth: SynthArg,

    /// CSV file with feature columns followed by a final `label` column of 0/1
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

impl DataArgs {
    pub fn source(&self) -> DataSource {
        match &self.csv {
            Some(path) => DataSource::Csv(path.clone()),
            None => DataSource::Synth(self.synth.0.clone()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,

    /// Training epochs
    #[arg(long, default_value_t = 120)]
    pub epochs: usize,

    /// Mini-batch size
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,

    /// SGD learning rate
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,

    /// SGD momentum
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    /// L2 weight decay applied to every parameter
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,

    /// Fraction of the data held out for validation (stratified)
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,

    /// Seed for the split, initialisation and batch order
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Betas at which F-beta is tracked, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3")]
    pub betas: Vec<f64>,
}

impl TrainingArgs {
    pub fn config(&self, loss: LossSpec) -> RunConfig {
        RunConfig {
            data: self.data.source(),
            hidden_layers: self.hidden.clone(),
            loss,
            sgd: SgdConfig {
                learning_rate: self.lr,
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            batch_size: self.batch_size,
            epochs: self.epochs,
            val_fraction: self.val_fraction,
            seed: self.seed,
            eval_betas: self.betas.clone(),
        }
    }
}
