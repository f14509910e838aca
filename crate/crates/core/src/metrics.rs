//! Confusion-matrix metrics for binary classifiers whose output `f` is the
//! probability of the positive class.
//!
//! The F-beta score is available in three algebraic forms that must agree:
//! from raw confusion counts (precision/recall harmonic mean), from the
//! sample proportions `(p_n, q0_n, q1_n)`, and from the smoothed proportions
//! in which the hard prediction is replaced by the classifier score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold at which a score is predicted positive. Ties predict positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Lower bound applied to the smoothed F-beta denominator.
pub const SMOOTHED_DENOMINATOR_EPS: f64 = 1e-7;

/// A thresholded classifier output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub label_hat: u8,
}

impl Prediction {
    pub fn new(score: f64) -> Self {
        Prediction {
            score,
            label_hat: u8::from(score >= DECISION_THRESHOLD),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Number of actual positives, `n1`.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    /// `tp / (tp + fp)`, or 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio_or_zero(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, or 0 when there are no actual positives.
    pub fn recall(&self) -> f64 {
        ratio_or_zero(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio_or_zero(self.tp + self.tn, self.total())
    }
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Positive fraction and the two hard error rates of a confusion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleProportions {
    pub p_n: f64,
    /// False-negative rate among actual positives.
    pub q0_n: f64,
    /// False-positive rate among actual negatives.
    pub q1_n: f64,
}

/// Differentiable counterparts of `q0_n` and `q1_n`: the mean of `1 - f`
/// over positives and the mean of `f` over negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedProportions {
    pub q0_tilde: f64,
    pub q1_tilde: f64,
}

pub(crate) fn check_labels(scores_len: usize, labels: &[u8]) -> Result<()> {
    if scores_len != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores_len,
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty input"));
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(Error::invalid(format!(
            "label {} at index {i} is not 0 or 1",
            labels[i]
        )));
    }
    Ok(())
}

fn check_scores(scores: &[f64]) -> Result<()> {
    match scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        Some(i) => Err(Error::invalid(format!(
            "score {} at index {i} is outside [0, 1]",
            scores[i]
        ))),
        None => Ok(()),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must be positive, got {beta}")))
    }
}

pub fn confusion(scores: &[f64], labels: &[u8]) -> Result<ConfusionCounts> {
    check_labels(scores.len(), labels)?;
    check_scores(scores)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (y, Prediction::new(s).label_hat) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (0, _) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn proportions(c: &ConfusionCounts) -> Result<SampleProportions> {
    let n1 = c.positives();
    let n0 = c.negatives();
    if n1 == 0 || n0 == 0 {
        return Err(Error::degenerate(format!(
            "{n1} positives and {n0} negatives in confusion table"
        )));
    }
    let n = (n1 + n0) as f64;
    Ok(SampleProportions {
        p_n: n1 as f64 / n,
        q0_n: c.fn_ as f64 / n1 as f64,
        q1_n: c.fp as f64 / n0 as f64,
    })
}

pub fn smoothed_proportions(scores: &[f64], labels: &[u8]) -> Result<SmoothedProportions> {
    check_labels(scores.len(), labels)?;
    let (mut miss, mut n1) = (0.0, 0usize);
    let (mut false_alarm, mut n0) = (0.0, 0usize);
    for (&f, &y) in scores.iter().zip(labels) {
        if y == 1 {
            miss += 1.0 - f;
            n1 += 1;
        } else {
            false_alarm += f;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::degenerate(format!(
            "{n1} positives and {n0} negatives in batch"
        )));
    }
    Ok(SmoothedProportions {
        q0_tilde: miss / n1 as f64,
        q1_tilde: false_alarm / n0 as f64,
    })
}

/// F-beta as the weighted harmonic mean of precision and recall. Zero when
/// `tp = 0`, which also covers the empty-denominator cases.
pub fn f_beta_from_confusion(c: &ConfusionCounts, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if c.tp == 0 {
        return Ok(0.0);
    }
    let precision = c.precision();
    let recall = c.recall();
    let b2 = beta * beta;
    Ok((1.0 + b2) * precision * recall / (b2 * precision + recall))
}

/// Numerator and denominator of F-beta written over `(p, q0, q1)`.
pub(crate) fn f_beta_parts(p: f64, q0: f64, q1: f64, beta: f64) -> (f64, f64) {
    let b2 = beta * beta;
    let num = (1.0 + b2) * p * (1.0 - q0);
    let den = p * (b2 + 1.0 - q0 - q1) + q1;
    (num, den)
}

pub(crate) fn check_proportion(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "positive proportion must lie in (0, 1), got {p}"
        )))
    }
}

pub fn f_beta_from_proportions(prop: &SampleProportions, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_proportion(prop.p_n)?;
    let (num, den) = f_beta_parts(prop.p_n, prop.q0_n, prop.q1_n, beta);
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// F-beta evaluated at the smoothed proportions, with the batch positive
/// fraction `p_n`.
pub fn smoothed_f_beta(sp: &SmoothedProportions, p_n: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_proportion(p_n)?;
    let (num, den) = f_beta_parts(p_n, sp.q0_tilde, sp.q1_tilde, beta);
    Ok(num / den.max(SMOOTHED_DENOMINATOR_EPS))
}

/// Convenience: F-beta of hard predictions thresholded from `scores`.
pub fn f_beta(scores: &[f64], labels: &[u8], beta: f64) -> Result<f64> {
    f_beta_from_confusion(&confusion(scores, labels)?, beta)
}
