//! Surrogate F-beta losses for imbalanced binary classification.
//!
//! The crate bundles everything needed to train and inspect a small
//! classifier under the surrogate F-beta loss and its baselines:
//!
//! * [`metrics`]: confusion counts, sample and smoothed proportions, F-beta
//! * [`losses`]: BCE, MAE, surrogate and generalized surrogate F-beta, macro-soft F-beta
//! * [`model`]: dense ReLU network with a sigmoid output and exact backpropagation
//! * [`optimizer`]: momentum SGD with weight decay
//! * [`data`]: synthetic Gaussians, CSV ingestion, stratified splits, batching
//! * [`diagnostics`]: gradient conditions at critical points, Jensen gaps, Monte-Carlo error rates
//! * [`experiment`]: training runs, telemetry files, beta sweeps

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod stats;

pub use data::{Dataset, SynthSpec};
pub use error::{Error, Result};
pub use experiment::{DataSource, EpochRecord, RunConfig, RunOutput, ScatterRow};
pub use losses::{ClassWeights, LossKind, LossSpec, PositivePrior};
pub use metrics::{ConfusionCounts, SampleProportions, SmoothedProportions};
pub use model::{Network, ParamVector};
pub use optimizer::{OptimizerState, SgdConfig};
