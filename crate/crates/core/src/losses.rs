//! Per-sample binary classification losses, their derivatives with respect
//! to the classifier output `f`, and class-balanced batch means.
//!
//! Every family is written in terms of `f = Pr(y = 1 | x)`. Logarithm and
//! power arguments that depend on `f` are clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]`;
//! inside a clamped region the derivative is zero.
//!
//! The surrogate F-beta loss shares its positive branch with BCE and
//! replaces the negative branch by `log(beta^2 p / (1 - p) + f)`. Its
//! class-balanced mean is approximately
//! `-log(1 - q0_tilde) + log(beta^2 p / (1 - p) + q1_tilde)`, whose critical
//! points satisfy the same gradient condition as the large-sample F-beta.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{check_labels, check_proportion, smoothed_f_beta, smoothed_proportions};

pub const CLAMP_EPS: f64 = 1e-7;

fn clamp_prob(f: f64) -> f64 {
    f.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
}

fn clamped(f: f64) -> bool {
    !(CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&f)
}

/// Offset `beta^2 p / (1 - p)` in the negative branch of the surrogate losses.
pub fn negative_offset(beta: f64, p: f64) -> f64 {
    beta * beta * p / (1.0 - p)
}

pub fn bce(f: f64, y: u8) -> f64 {
    let f = clamp_prob(f);
    if y == 1 {
        -f.ln()
    } else {
        -(1.0 - f).ln()
    }
}

pub fn mae(f: f64, y: u8) -> f64 {
    if y == 1 {
        2.0 * (1.0 - f)
    } else {
        2.0 * f
    }
}

pub fn surrogate_fbeta(f: f64, y: u8, beta: f64, p: f64) -> f64 {
    if y == 1 {
        -clamp_prob(f).ln()
    } else {
        (negative_offset(beta, p) + f).ln()
    }
}

/// Power-family version of [`surrogate_fbeta`]; tends to it as `q -> 0` and
/// equals half the MAE at `q = 1, beta = 1, p = 0.5`.
pub fn generalized_surrogate(f: f64, y: u8, beta: f64, p: f64, q: f64) -> f64 {
    if y == 1 {
        let f = clamp_prob(f);
        if q == 1.0 {
            1.0 - f
        } else {
            // (1 - f^q) / q without cancellation for small q
            -(q * f.ln()).exp_m1() / q
        }
    } else {
        let c = negative_offset(beta, p);
        if q == 1.0 {
            (c - 1.0) + f
        } else {
            (q * (c + f).ln()).exp_m1() / q
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivePrior {
    /// Use the training-set positive frequency.
    Auto,
    Fixed(f64),
}

impl PositivePrior {
    pub fn resolve(self, train_fraction: f64) -> f64 {
        match self {
            PositivePrior::Auto => train_fraction,
            PositivePrior::Fixed(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Bce,
    Mae,
    Surrogate {
        beta: f64,
        p: PositivePrior,
    },
    Generalized {
        beta: f64,
        p: PositivePrior,
        q: f64,
    },
    /// One minus the smoothed F-beta of a batch. Has no per-sample form.
    MacroSoft {
        beta: f64,
    },
}

/// Loss family, its parameters, and whether class-balancing weights apply.
///
/// The canonical text form is one of `bce`, `mae`,
/// `surrogate(beta=1,p=auto)`, `generalized(beta=1,p=auto,q=0.7)`,
/// `macrosoft(beta=1)`, optionally followed by `,balanced`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LossSpec {
    pub kind: LossKind,
    pub class_balanced: bool,
}

impl LossSpec {
    pub fn new(kind: LossKind, class_balanced: bool) -> Result<Self> {
        let spec = LossSpec {
            kind,
            class_balanced,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bce() -> Self {
        LossSpec {
            kind: LossKind::Bce,
            class_balanced: false,
        }
    }

    pub fn mae() -> Self {
        LossSpec {
            kind: LossKind::Mae,
            class_balanced: false,
        }
    }

    pub fn surrogate(beta: f64) -> Self {
        LossSpec {
            kind: LossKind::Surrogate {
                beta,
                p: PositivePrior::Auto,
            },
            class_balanced: false,
        }
    }

    pub fn generalized(beta: f64, q: f64) -> Self {
        LossSpec {
            kind: LossKind::Generalized {
                beta,
                p: PositivePrior::Auto,
                q,
            },
            class_balanced: false,
        }
    }

    pub fn macro_soft(beta: f64) -> Self {
        LossSpec {
            kind: LossKind::MacroSoft { beta },
            class_balanced: false,
        }
    }

    pub fn balanced(mut self) -> Self {
        self.class_balanced = true;
        self
    }

    pub fn with_prior(mut self, prior: PositivePrior) -> Self {
        match &mut self.kind {
            LossKind::Surrogate { p, .. } | LossKind::Generalized { p, .. } => *p = prior,
            _ => {}
        }
        self
    }

    /// Replaces `p=auto` by the given training-set positive fraction.
    pub fn resolved(self, train_fraction: f64) -> Self {
        match self.kind {
            LossKind::Surrogate { p, .. } | LossKind::Generalized { p, .. } => {
                self.with_prior(PositivePrior::Fixed(p.resolve(train_fraction)))
            }
            _ => self,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self.kind {
            LossKind::Bce => "bce",
            LossKind::Mae => "mae",
            LossKind::Surrogate { .. } => "surrogate",
            LossKind::Generalized { .. } => "generalized",
            LossKind::MacroSoft { .. } => "macrosoft",
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            LossKind::Surrogate { beta, .. }
            | LossKind::Generalized { beta, .. }
            | LossKind::MacroSoft { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn is_per_sample(&self) -> bool {
        !matches!(self.kind, LossKind::MacroSoft { .. })
    }

    fn validate(&self) -> Result<()> {
        let check_beta = |beta: f64| {
            if beta > 0.0 && beta.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("beta must be positive, got {beta}")))
            }
        };
        let check_prior = |p: PositivePrior| match p {
            PositivePrior::Auto => Ok(()),
            PositivePrior::Fixed(p) => check_proportion(p),
        };
        match self.kind {
            LossKind::Bce | LossKind::Mae => Ok(()),
            LossKind::Surrogate { beta, p } => {
                check_beta(beta)?;
                check_prior(p)
            }
            LossKind::Generalized { beta, p, q } => {
                check_beta(beta)?;
                check_prior(p)?;
                if q > 0.0 && q <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("q must lie in (0, 1], got {q}")))
                }
            }
            LossKind::MacroSoft { beta } => check_beta(beta),
        }
    }

    fn fixed_prior(p: PositivePrior) -> Result<f64> {
        match p {
            PositivePrior::Fixed(p) => Ok(p),
            PositivePrior::Auto => Err(Error::invalid(
                "p=auto must be resolved against the training set before evaluation",
            )),
        }
    }

    /// Per-sample loss value.
    pub fn value(&self, f: f64, y: u8) -> Result<f64> {
        Ok(match self.kind {
            LossKind::Bce => bce(f, y),
            LossKind::Mae => mae(f, y),
            LossKind::Surrogate { beta, p } => surrogate_fbeta(f, y, beta, Self::fixed_prior(p)?),
            LossKind::Generalized { beta, p, q } => {
                generalized_surrogate(f, y, beta, Self::fixed_prior(p)?, q)
            }
            LossKind::MacroSoft { .. } => {
                return Err(Error::Unsupported(
                    "macro-soft F-beta is a batch-level loss".into(),
                ))
            }
        })
    }
}

/// Exact `dL/df` for a per-sample family, zero wherever clamping is active.
pub fn loss_grad_f(spec: &LossSpec, f: f64, y: u8) -> Result<f64> {
    let positive_log_branch = |f: f64| if clamped(f) { 0.0 } else { -1.0 / f };
    Ok(match spec.kind {
        LossKind::Bce => {
            if clamped(f) {
                0.0
            } else if y == 1 {
                -1.0 / f
            } else {
                1.0 / (1.0 - f)
            }
        }
        LossKind::Mae => {
            if y == 1 {
                -2.0
            } else {
                2.0
            }
        }
        LossKind::Surrogate { beta, p } => {
            if y == 1 {
                positive_log_branch(f)
            } else {
                1.0 / (negative_offset(beta, LossSpec::fixed_prior(p)?) + f)
            }
        }
        LossKind::Generalized { beta, p, q } => {
            if y == 1 {
                if clamped(f) {
                    0.0
                } else {
                    -f.powf(q - 1.0)
                }
            } else {
                (negative_offset(beta, LossSpec::fixed_prior(p)?) + f).powf(q - 1.0)
            }
        }
        LossKind::MacroSoft { .. } => {
            return Err(Error::Unsupported(
                "macro-soft F-beta has no per-sample derivative; use the batch gradient".into(),
            ))
        }
    })
}

/// Inverse class-frequency weights `w_y = n / n_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights { w0: 1.0, w1: 1.0 }
    }

    pub fn inverse_frequency(labels: &[u8]) -> Result<Self> {
        let n = labels.len();
        let n1 = labels.iter().filter(|&&y| y == 1).count();
        let n0 = n - n1;
        if n1 == 0 || n0 == 0 {
            return Err(Error::degenerate(format!(
                "class weights need both classes, got {n1} positives and {n0} negatives"
            )));
        }
        Ok(ClassWeights {
            w0: n as f64 / n0 as f64,
            w1: n as f64 / n1 as f64,
        })
    }

    /// Inverse-frequency weights if `spec` asks for balancing, else ones.
    pub fn for_spec(spec: &LossSpec, labels: &[u8]) -> Result<Self> {
        if spec.class_balanced {
            Self::inverse_frequency(labels)
        } else {
            Ok(Self::uniform())
        }
    }

    pub fn get(&self, y: u8) -> f64 {
        if y == 1 {
            self.w1
        } else {
            self.w0
        }
    }
}

/// `(1/n) sum_i w_{y_i} L(f_i, y_i)` for a per-sample family.
pub fn class_balanced_mean(
    spec: &LossSpec,
    scores: &[f64],
    labels: &[u8],
    weights: &ClassWeights,
) -> Result<f64> {
    check_labels(scores.len(), labels)?;
    let mut total = 0.0;
    for (&f, &y) in scores.iter().zip(labels) {
        total += weights.get(y) * spec.value(f, y)?;
    }
    Ok(total / scores.len() as f64)
}

/// `1 - smoothed F-beta` of a batch, with `p_n` the batch positive fraction
/// supplied by the caller.
pub fn macro_soft_fbeta_batch(scores: &[f64], labels: &[u8], beta: f64, p_n: f64) -> Result<f64> {
    let sp = smoothed_proportions(scores, labels)?;
    Ok(1.0 - smoothed_f_beta(&sp, p_n, beta)?)
}

/// Loss of a whole batch: the class-balanced mean for per-sample families,
/// or the macro-soft loss with the batch's own positive fraction.
pub fn batch_loss(
    spec: &LossSpec,
    scores: &[f64],
    labels: &[u8],
    weights: &ClassWeights,
) -> Result<f64> {
    match spec.kind {
        LossKind::MacroSoft { beta } => {
            check_labels(scores.len(), labels)?;
            let n1 = labels.iter().filter(|&&y| y == 1).count();
            macro_soft_fbeta_batch(scores, labels, beta, n1 as f64 / labels.len() as f64)
        }
        _ => class_balanced_mean(spec, scores, labels, weights),
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    if s.contains(['.', 'e', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

impl fmt::Display for PositivePrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositivePrior::Auto => f.write_str("auto"),
            PositivePrior::Fixed(p) => f.write_str(&fmt_num(*p)),
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Bce => f.write_str("bce")?,
            LossKind::Mae => f.write_str("mae")?,
            LossKind::Surrogate { beta, p } => {
                write!(f, "surrogate(beta={},p={p})", fmt_num(beta))?
            }
            LossKind::Generalized { beta, p, q } => write!(
                f,
                "generalized(beta={},p={p},q={})",
                fmt_num(beta),
                fmt_num(q)
            )?,
            LossKind::MacroSoft { beta } => write!(f, "macrosoft(beta={})", fmt_num(beta))?,
        }
        if self.class_balanced {
            f.write_str(",balanced")?;
        }
        Ok(())
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, balanced) = match s.strip_suffix(",balanced") {
            Some(head) => (head.trim_end(), true),
            None => (s, false),
        };
        let (name, args) = match head.find('(') {
            Some(open) => {
                let inner = head[open + 1..].strip_suffix(')').ok_or_else(|| {
                    Error::invalid(format!("unterminated argument list in `{head}`"))
                })?;
                (head[..open].trim(), Some(inner))
            }
            None => (head, None),
        };

        let mut beta = 1.0;
        let mut prior = PositivePrior::Auto;
        let mut q = None;
        let allowed: &[&str] = match name {
            "bce" | "mae" => &[],
            "surrogate" => &["beta", "p"],
            "generalized" => &["beta", "p", "q"],
            "macrosoft" => &["beta"],
            other => return Err(Error::invalid(format!("unknown loss family `{other}`"))),
        };
        for token in args.into_iter().flat_map(|a| a.split(',')) {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got `{token}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !allowed.contains(&key) {
                return Err(Error::invalid(format!(
                    "`{token}`: parameter `{key}` does not apply to `{name}`"
                )));
            }
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("`{token}`: `{value}` is not a number")))
            };
            match key {
                "beta" => beta = number()?,
                "q" => q = Some(number()?),
                "p" if value == "auto" => prior = PositivePrior::Auto,
                "p" => prior = PositivePrior::Fixed(number()?),
                _ => unreachable!(),
            }
        }

        let kind = match name {
            "bce" => LossKind::Bce,
            "mae" => LossKind::Mae,
            "surrogate" => LossKind::Surrogate { beta, p: prior },
            "generalized" => LossKind::Generalized {
                beta,
                p: prior,
                q: q.ok_or_else(|| Error::invalid("`generalized` requires q=<value>"))?,
            },
            _ => LossKind::MacroSoft { beta },
        };
        LossSpec::new(kind, balanced)
    }
}

impl TryFrom<String> for LossSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossSpec> for String {
    fn from(spec: LossSpec) -> String {
        spec.to_string()
    }
}
