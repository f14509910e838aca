//! Momentum SGD with L2 weight decay folded into the gradient:
//!
//! ```text
//! v <- momentum * v + (grad + weight_decay * params)
//! params <- params - learning_rate * v
//! ```
//!
//! Decay applies to every parameter, biases included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub velocity: ParamVector,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        OptimizerState {
            velocity: ParamVector::zeros(len),
            step_count: 0,
        }
    }
}

/// One update. Pure: the inputs are left untouched.
pub fn step(
    params: &ParamVector,
    grad: &ParamVector,
    state: &OptimizerState,
    cfg: &SgdConfig,
) -> Result<(ParamVector, OptimizerState)> {
    for len in [grad.len(), state.velocity.len()] {
        if len != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: len,
            });
        }
    }
    let velocity: Vec<f64> = state
        .velocity
        .iter()
        .zip(grad.iter())
        .zip(params.iter())
        .map(|((v, g), p)| cfg.momentum * v + (g + cfg.weight_decay * p))
        .collect();
    let next: Vec<f64> = params
        .iter()
        .zip(&velocity)
        .map(|(p, v)| p - cfg.learning_rate * v)
        .collect();
    Ok((
        ParamVector(next),
        OptimizerState {
            velocity: ParamVector(velocity),
            step_count: state.step_count + 1,
        },
    ))
}
