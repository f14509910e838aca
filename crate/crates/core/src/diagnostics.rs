//! Empirical checks of the gradient conditions satisfied at critical points
//! of class-balanced risks, the Jensen gap behind the log-of-means
//! approximation, Monte-Carlo estimates of population error rates, and a
//! finite-difference audit of [`backward`](crate::model::backward).
//!
//! Writing `q0`, `q1` for the smoothed proportions and `q0'`, `q1'` for their
//! parameter gradients, a critical point of the class-balanced risk satisfies
//! approximately (exactly for MAE)
//!
//! | family    | left side           | right side             |
//! |-----------|---------------------|------------------------|
//! | BCE       | `-q0' / (1 - q0)`   | `q1' / (1 - q1)`       |
//! | MAE       | `-q0'`              | `q1'`                  |
//! | surrogate | `-q0' / (1 - q0)`   | `q1' / (c + q1)`       |
//!
//! with `c = beta^2 p / (1 - p)`. The reports compare the two sides as whole
//! vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sample_iid, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::losses::{
    batch_loss, class_balanced_mean, negative_offset, ClassWeights, LossKind, LossSpec,
    PositivePrior,
};
use crate::metrics::{
    confusion, f_beta_from_proportions, f_beta_parts, smoothed_proportions, SampleProportions,
};
use crate::model::{backward, smoothed_proportion_grads, Network, ParamVector};

/// Floor on the residual normaliser.
pub const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientConditionReport {
    pub loss_family: String,
    pub lhs: ParamVector,
    pub rhs: ParamVector,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, eps)`.
    pub residual_norm: f64,
    pub cosine: f64,
    /// Norm of the exact class-balanced risk gradient.
    pub total_grad_norm: f64,
    pub q0_tilde: f64,
    pub q1_tilde: f64,
    pub log_fbeta: LogFBetaGradient,
}

/// Gradient of `log F` at the smoothed proportions, with its normaliser `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFBetaGradient {
    pub beta: f64,
    pub z: f64,
    pub grad_norm: f64,
}

/// `d log F / d theta` written through `(q0, q1)` and their gradients:
/// `z^-1 (-q0' (beta^2 p - p q1 + q1) + q1' (p - p q0 - 1 + q0))` with
/// `z = (1 - q0)(p (beta^2 + 1 - q0 - q1) + q1)`.
pub fn log_fbeta_gradient(
    q0: f64,
    q1: f64,
    q0_grad: &ParamVector,
    q1_grad: &ParamVector,
    p: f64,
    beta: f64,
) -> (ParamVector, f64) {
    let b2 = beta * beta;
    let (_, den) = f_beta_parts(p, q0, q1, beta);
    let z = (1.0 - q0) * den;
    let a = -(b2 * p - p * q1 + q1) / z;
    let b = (p - p * q0 - 1.0 + q0) / z;
    let grad = q0_grad
        .iter()
        .zip(q1_grad.iter())
        .map(|(g0, g1)| a * g0 + b * g1)
        .collect();
    (ParamVector(grad), z)
}

fn cosine(a: &ParamVector, b: &ParamVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na < RESIDUAL_EPS && nb < RESIDUAL_EPS {
        return 1.0;
    }
    if na < RESIDUAL_EPS || nb < RESIDUAL_EPS {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn gradient_condition_residual(
    net: &Network,
    dataset: &Dataset,
    spec: &LossSpec,
) -> Result<GradientConditionReport> {
    if !spec.class_balanced {
        return Err(Error::invalid(format!(
            "gradient conditions are stated for class-balanced risks, got `{spec}`"
        )));
    }
    let spec = spec.resolved(dataset.positive_fraction());
    let scores = net.predict(dataset)?;
    let sp = smoothed_proportions(&scores, dataset.labels())?;
    let (q0, q1) = (sp.q0_tilde, sp.q1_tilde);
    let (g0, g1) = smoothed_proportion_grads(net, dataset)?;

    let neg_g0 = g0.scaled(-1.0);
    let (lhs, rhs, beta) = match spec.kind {
        LossKind::Bce => (
            neg_g0.scaled(1.0 / (1.0 - q0)),
            g1.scaled(1.0 / (1.0 - q1)),
            1.0,
        ),
        LossKind::Mae => (neg_g0, g1.clone(), 1.0),
        LossKind::Surrogate {
            beta,
            p: PositivePrior::Fixed(p),
        } => (
            neg_g0.scaled(1.0 / (1.0 - q0)),
            g1.scaled(1.0 / (negative_offset(beta, p) + q1)),
            beta,
        ),
        _ => {
            return Err(Error::Unsupported(format!(
                "no gradient condition for `{spec}`"
            )))
        }
    };

    let weights = ClassWeights::inverse_frequency(dataset.labels())?;
    let (_, total) = backward(net, dataset, &spec, &weights)?;
    let residual_norm = lhs.sub(&rhs).norm() / lhs.norm().max(rhs.norm()).max(RESIDUAL_EPS);
    let (log_grad, z) = log_fbeta_gradient(q0, q1, &g0, &g1, dataset.positive_fraction(), beta);

    Ok(GradientConditionReport {
        loss_family: spec.family_name().to_string(),
        cosine: cosine(&lhs, &rhs),
        lhs,
        rhs,
        residual_norm,
        total_grad_norm: total.norm(),
        q0_tilde: q0,
        q1_tilde: q1,
        log_fbeta: LogFBetaGradient {
            beta,
            z,
            grad_norm: log_grad.norm(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenGap {
    /// Class-balanced BCE mean.
    pub exact: f64,
    /// `-log(1 - q0) - log(1 - q1)` at the smoothed proportions.
    pub approx: f64,
    pub gap: f64,
}

/// Jensen gap of the class-balanced BCE for given scores; weights come from
/// the same labels.
pub fn jensen_gap_scores(scores: &[f64], labels: &[u8]) -> Result<JensenGap> {
    let weights = ClassWeights::inverse_frequency(labels)?;
    let exact = class_balanced_mean(&LossSpec::bce(), scores, labels, &weights)?;
    // use the same clamped scores the loss sees
    let clamped: Vec<f64> = scores
        .iter()
        .map(|f| f.clamp(crate::losses::CLAMP_EPS, 1.0 - crate::losses::CLAMP_EPS))
        .collect();
    let sp = smoothed_proportions(&clamped, labels)?;
    let approx = -(1.0 - sp.q0_tilde).ln() - (1.0 - sp.q1_tilde).ln();
    let mut gap = exact - approx;
    // rounding noise around an exact equality
    if gap < 0.0 && gap > -1e-12 {
        gap = 0.0;
    }
    Ok(JensenGap { exact, approx, gap })
}

pub fn jensen_gap(net: &Network, dataset: &Dataset) -> Result<JensenGap> {
    jensen_gap_scores(&net.predict(dataset)?, dataset.labels())
}

/// Monte-Carlo estimates of `Pr(y=1)`, `Pr(yhat=0 | y=1)`, `Pr(yhat=1 | y=0)`
/// with binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationProportions {
    pub p: f64,
    pub q0: f64,
    pub q1: f64,
    pub p_se: f64,
    pub q0_se: f64,
    pub q1_se: f64,
    pub samples: usize,
}

pub const MIN_MC_SAMPLES: usize = 1000;

fn binomial_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

pub fn population_proportions(
    net: &Network,
    spec: &SynthSpec,
    mc_samples: usize,
    seed: u64,
) -> Result<PopulationProportions> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {mc_samples}"
        )));
    }
    let sample = sample_iid(spec, mc_samples, seed)?;
    let counts = confusion(&net.predict(&sample)?, sample.labels())?;
    let (n1, n0) = (counts.positives() as usize, counts.negatives() as usize);
    if n1 == 0 || n0 == 0 {
        return Err(Error::degenerate(format!(
            "Monte-Carlo sample drew {n1} positives and {n0} negatives"
        )));
    }
    let p = n1 as f64 / mc_samples as f64;
    let q0 = counts.fn_ as f64 / n1 as f64;
    let q1 = counts.fp as f64 / n0 as f64;
    Ok(PopulationProportions {
        p,
        q0,
        q1,
        p_se: binomial_se(p, mc_samples),
        q0_se: binomial_se(q0, n1),
        q1_se: binomial_se(q1, n0),
        samples: mc_samples,
    })
}

/// Large-sample F-beta at population proportions.
pub fn limit_f_beta(pp: &PopulationProportions, beta: f64) -> Result<f64> {
    f_beta_from_proportions(
        &SampleProportions {
            p_n: pp.p,
            q0_n: pp.q0,
            q1_n: pp.q1,
        },
        beta,
    )
}

/// Largest finite-difference disagreement seen for one loss configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub loss: String,
    pub trials: usize,
    pub max_rel_err: f64,
}

/// Relative error `|analytic - numeric|_inf / max(|analytic|_inf, |numeric|_inf)`
/// between [`backward`] and central differences with step `1e-5 * max(1, |theta_j|)`.
///
/// When a ReLU unit changes sign inside the stencil of a coordinate, the
/// one-sided difference on the side that keeps the sign pattern is used
/// instead; coordinates whose both sides cross a kink are skipped.
pub fn gradcheck(
    net: &Network,
    batch: &Dataset,
    spec: &LossSpec,
    weights: &ClassWeights,
) -> Result<f64> {
    let (loss0, analytic) = backward(net, batch, spec, weights)?;
    let pattern0 = net.relu_pattern(batch);
    let theta = net.params();
    let mut probe = net.clone();
    let mut eval = |params: &[f64]| -> Result<(f64, bool)> {
        probe.set_params(params)?;
        let loss = batch_loss(spec, &probe.predict(batch)?, batch.labels(), weights)?;
        Ok((loss, probe.relu_pattern(batch) == pattern0))
    };
    let mut worst_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut shifted = theta.clone();
    for j in 0..theta.len() {
        let h = 1e-5 * theta[j].abs().max(1.0);
        shifted[j] = theta[j] + h;
        let (up, up_smooth) = eval(&shifted)?;
        shifted[j] = theta[j] - h;
        let (down, down_smooth) = eval(&shifted)?;
        shifted[j] = theta[j];
        let numeric = match (up_smooth, down_smooth) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - loss0) / h,
            (false, true) => (loss0 - down) / h,
            (false, false) => continue,
        };
        worst_abs = worst_abs.max((numeric - analytic[j]).abs());
        scale = scale.max(numeric.abs()).max(analytic[j].abs());
    }
    Ok(if scale == 0.0 { 0.0 } else { worst_abs / scale })
}

/// Loss configurations audited by [`gradcheck_suite`].
pub fn gradcheck_losses() -> Vec<LossSpec> {
    let mut base = vec![LossSpec::bce(), LossSpec::mae()];
    base.extend([0.5, 1.0, 2.0, 3.0].map(LossSpec::surrogate));
    base.extend([0.3, 0.7, 1.0].map(|q| LossSpec::generalized(1.0, q)));
    base.push(LossSpec::macro_soft(1.0));
    base.iter().flat_map(|s| [*s, s.balanced()]).collect()
}

/// Randomized finite-difference audit: for every loss in [`gradcheck_losses`],
/// `trials_per_loss` random networks of shape (2,4,1) or (5,8,8,1) on random
/// batches of 8 to 32 rows.
pub fn gradcheck_suite(trials_per_loss: usize, seed: u64) -> Result<Vec<GradcheckSummary>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for spec in gradcheck_losses() {
        let mut worst: f64 = 0.0;
        for _ in 0..trials_per_loss {
            let shape: &[usize] = if rng.random::<bool>() {
                &[2, 4, 1]
            } else {
                &[5, 8, 8, 1]
            };
            let net = jittered(Network::init(shape, rng.random())?, &mut rng)?;
            let batch = random_batch(&mut rng, shape[0]);
            let spec = spec.resolved(rng.random_range(0.05..0.95));
            let weights = ClassWeights::for_spec(&spec, batch.labels())?;
            worst = worst.max(gradcheck(&net, &batch, &spec, &weights)?);
        }
        out.push(GradcheckSummary {
            loss: spec.to_string(),
            trials: trials_per_loss,
            max_rel_err: worst,
        });
    }
    Ok(out)
}

/// Adds small uniform noise to every parameter so that no ReLU input sits
/// exactly on its kink (zero biases feeding dead units would).
fn jittered(net: Network, rng: &mut ChaCha8Rng) -> Result<Network> {
    let params: Vec<f64> = net
        .params()
        .iter()
        .map(|v| v + rng.random_range(-0.1..0.1))
        .collect();
    net.with_params(&params)
}

fn random_batch(rng: &mut ChaCha8Rng, dim: usize) -> Dataset {
    let n = rng.random_range(8..=32);
    let features = (0..n * dim)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let mut labels: Vec<u8> = (0..n)
        .map(|_| u8::from(rng.random::<f64>() < 0.3))
        .collect();
    labels[0] = 1;
    labels[1] = 0;
    Dataset::new(features, labels, dim).expect("consistent sizes")
}
