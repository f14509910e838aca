//! Dense feed-forward binary classifier with a single sigmoid output.
//!
//! A two-way softmax head `(f0, f1)` carries exactly one degree of freedom,
//! `f0 = 1 - f1`, so the network emits `f = f1` directly through a sigmoid.
//! Hidden layers use ReLU.
//!
//! Parameters flatten into a [`ParamVector`] layer by layer; within a layer
//! the weight matrix comes first in row-major `(out, in)` order, followed by
//! the bias.

use std::ops::{Deref, DerefMut};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{rng_for, Dataset};
use crate::error::{Error, Result};
use crate::losses::{batch_loss, loss_grad_f, ClassWeights, LossKind, LossSpec};
use crate::metrics::{check_proportion, f_beta_parts, SMOOTHED_DENOMINATOR_EPS};

const STREAM_INIT: u64 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, &b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let z = row.iter().zip(input).fold(b, |acc, (w, x)| acc + w * x);
            out.push(self.activation.apply(z));
        }
    }
}

/// Flattened network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, k: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| v * k).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Logistic function, kept strictly inside `(0, 1)`.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    /// Seed used by [`Network::init`], if any.
    seed: Option<u64>,
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.len() < 2 || shape.contains(&0) {
        return Err(Error::invalid(format!(
            "network shape {shape:?} needs at least two positive layer sizes"
        )));
    }
    if shape[shape.len() - 1] != 1 {
        return Err(Error::invalid(format!(
            "network shape {shape:?} must end in a single output"
        )));
    }
    Ok(())
}

impl Network {
    /// All-zero network; outputs 0.5 everywhere.
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let last = shape.len() - 2;
        let layers = shape
            .windows(2)
            .enumerate()
            .map(|(l, w)| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
                activation: if l == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Ok(Network { layers, seed: None })
    }

    /// Uniform `(-s, s)` weights with `s = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(shape: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let mut rng = rng_for(seed, STREAM_INIT);
        for layer in &mut net.layers {
            let scale = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-scale..scale);
            }
        }
        net.seed = Some(seed);
        Ok(net)
    }

    /// Network whose output is `f` for every input.
    pub fn constant(shape: &[usize], f: f64) -> Result<Self> {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!(
                "constant output {f} outside (0, 1)"
            )));
        }
        let mut net = Self::zeros(shape)?;
        let last = net.layers.len() - 1;
        net.layers[last].bias[0] = (f / (1.0 - f)).ln();
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("network needs at least one layer"));
        };
        if last.outputs != 1 {
            return Err(Error::invalid("final layer must have a single output"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        for layer in &layers {
            if layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(Error::invalid(
                    "layer parameter lengths disagree with its size",
                ));
            }
        }
        Ok(Network { layers, seed: None })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut shape = vec![self.layers[0].inputs];
        shape.extend(self.layers.iter().map(|l| l.outputs));
        shape
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.bias);
        }
        ParamVector(v)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.weights.copy_from_slice(w);
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Network> {
        let mut net = self.clone();
        net.set_params(params)?;
        Ok(net)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x)`, the probability of the positive class.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&a, &mut next);
            std::mem::swap(&mut a, &mut next);
        }
        Ok(sigmoid(a[0]))
    }

    /// Forward pass keeping every layer's output; the last entry holds the logit.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().expect("input pushed above"), &mut out);
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: ds.dim(),
            });
        }
        Ok(ds
            .rows()
            .map(|x| sigmoid(self.trace(x).last().expect("non-empty")[0]))
            .collect())
    }

    /// Sign pattern of every ReLU unit over the batch; the network is smooth
    /// in its parameters wherever this pattern is constant.
    pub(crate) fn relu_pattern(&self, ds: &Dataset) -> Vec<bool> {
        let mut pattern = Vec::new();
        for x in ds.rows() {
            let acts = self.trace(x);
            for (layer, out) in self.layers.iter().zip(&acts[1..]) {
                if layer.activation == Activation::Relu {
                    pattern.extend(out.iter().map(|&a| a > 0.0));
                }
            }
        }
        pattern
    }

    /// Backpropagates per-sample output sensitivities `dL/df_i` into a
    /// parameter gradient. Samples are accumulated in order.
    fn backprop(&self, ds: &Dataset, output_grads: &[f64]) -> ParamVector {
        let mut grad = ParamVector::zeros(self.param_count());
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.param_count();
                Some(start)
            })
            .collect();

        for (x, &g) in ds.rows().zip(output_grads) {
            if g == 0.0 {
                continue;
            }
            let acts = self.trace(x);
            let f = sigmoid(acts[acts.len() - 1][0]);
            let mut delta = vec![g * f * (1.0 - f)];
            for (l, layer) in self.layers.iter().enumerate().rev() {
                let input = &acts[l];
                let base = offsets[l];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                    grad[base + layer.weights.len() + o] += d;
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for (o, &d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, &w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                    // inputs to this layer are outputs of layer l-1
                    if self.layers[l - 1].activation == Activation::Relu {
                        for (p, &a) in prev.iter_mut().zip(input) {
                            if a <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                    delta = prev;
                }
            }
        }
        grad
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(Error::file(path))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &Checkpoint::from(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::file(path))?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.into_network()
    }
}

pub const CHECKPOINT_FORMAT: &str = "fbeta-network";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk form of a [`Network`]: shape, activations, seed and the flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: Option<u64>,
    pub params: ParamVector,
}

impl From<&Network> for Checkpoint {
    fn from(net: &Network) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            shape: net.shape(),
            activations: net.layers.iter().map(|l| l.activation).collect(),
            seed: net.seed,
            params: net.params(),
        }
    }
}

impl Checkpoint {
    pub fn into_network(self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut net = Network::zeros(&self.shape)?;
        if self.activations.len() != net.layers.len() {
            return Err(Error::invalid(
                "checkpoint activation list has the wrong length",
            ));
        }
        for (layer, act) in net.layers.iter_mut().zip(self.activations) {
            layer.activation = act;
        }
        net.set_params(&self.params)?;
        net.seed = self.seed;
        Ok(net)
    }
}

/// Partial derivatives of `1 - smoothed F-beta` with respect to
/// `(q0_tilde, q1_tilde)`, plus the loss value.
pub(crate) fn macro_soft_partials(q0: f64, q1: f64, p: f64, beta: f64) -> (f64, f64, f64) {
    let (num, den) = f_beta_parts(p, q0, q1, beta);
    let guarded = den < SMOOTHED_DENOMINATOR_EPS;
    let den = den.max(SMOOTHED_DENOMINATOR_EPS);
    let b2 = beta * beta;
    let dden = if guarded { 0.0 } else { 1.0 };
    let df_dq0 = (-(1.0 + b2) * p * den + num * p * dden) / (den * den);
    let df_dq1 = -num * (1.0 - p) * dden / (den * den);
    (1.0 - num / den, -df_dq0, -df_dq1)
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::degenerate(format!(
            "batch has {n1} positives and {n0} negatives"
        )));
    }
    Ok((n1, n0))
}

/// Loss and parameter gradient of `spec` on `batch`.
///
/// Per-sample families use the weighted mean `(1/n) sum w_y L(f_i, y_i)`;
/// the macro-soft loss uses the batch's own positive fraction and ignores
/// `weights`.
pub fn backward(
    net: &Network,
    batch: &Dataset,
    spec: &LossSpec,
    weights: &ClassWeights,
) -> Result<(f64, ParamVector)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let scores = net.predict(batch)?;
    let labels = batch.labels();
    let n = labels.len() as f64;
    let output_grads: Vec<f64> = match spec.kind {
        LossKind::MacroSoft { beta } => {
            let (n1, n0) = class_counts(labels)?;
            let p = n1 as f64 / n;
            check_proportion(p)?;
            let sp = crate::metrics::smoothed_proportions(&scores, labels)?;
            let (_, dq0, dq1) = macro_soft_partials(sp.q0_tilde, sp.q1_tilde, p, beta);
            labels
                .iter()
                .map(|&y| {
                    if y == 1 {
                        -dq0 / n1 as f64
                    } else {
                        dq1 / n0 as f64
                    }
                })
                .collect()
        }
        _ => scores
            .iter()
            .zip(labels)
            .map(|(&f, &y)| Ok(weights.get(y) * loss_grad_f(spec, f, y)? / n))
            .collect::<Result<_>>()?,
    };
    let loss = batch_loss(spec, &scores, labels, weights)?;
    Ok((loss, net.backprop(batch, &output_grads)))
}

/// Exact gradients of `q0_tilde` and `q1_tilde` with respect to the parameters.
pub fn smoothed_proportion_grads(
    net: &Network,
    batch: &Dataset,
) -> Result<(ParamVector, ParamVector)> {
    let labels = batch.labels();
    let (n1, n0) = class_counts(labels)?;
    let q0_coeffs: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { -1.0 / n1 as f64 } else { 0.0 })
        .collect();
    let q1_coeffs: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 0 { 1.0 / n0 as f64 } else { 0.0 })
        .collect();
    Ok((
        net.backprop(batch, &q0_coeffs),
        net.backprop(batch, &q1_coeffs),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::PositivePrior;
    use crate::metrics::smoothed_proportions;

    fn random_batch(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = rng_for(seed, 99);
        let features = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        labels[0] = 1;
        labels[1] = 0;
        Dataset::new(features, labels, dim).unwrap()
    }

    /// Central differences of `objective` over every parameter.
    fn numeric_grad(net: &Network, objective: impl Fn(&Network) -> f64) -> Vec<f64> {
        let theta = net.params();
        (0..theta.len())
            .map(|j| {
                let h = 1e-5 * theta[j].abs().max(1.0);
                let mut plus = theta.clone();
                plus[j] += h;
                let mut minus = theta.clone();
                minus[j] -= h;
                let fp = objective(&net.with_params(&plus).unwrap());
                let fm = objective(&net.with_params(&minus).unwrap());
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn forward_examples() {
        let net = Network::zeros(&[3, 4, 1]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.5);
        let single = Network::from_layers(vec![Layer {
            inputs: 1,
            outputs: 1,
            weights: vec![1.0],
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(single.forward(&[0.0]).unwrap(), 0.5);
        assert!((single.forward(&[3f64.ln()]).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            single.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
        let f = single.forward(&[1e6]).unwrap();
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn init_examples() {
        let a = Network::init(&[2, 4, 1], 5).unwrap();
        assert_eq!(a, Network::init(&[2, 4, 1], 5).unwrap());
        assert_ne!(a.params(), Network::init(&[2, 4, 1], 6).unwrap().params());
        assert_eq!(a.param_count(), 17);
        let scale = (6.0f64 / 6.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() < scale));
        assert!(a.layers()[0].bias.iter().all(|&b| b == 0.0));
        assert!(Network::init(&[2, 4, 2], 5).is_err());
    }

    #[test]
    fn params_round_trip() {
        let net = Network::init(&[5, 8, 8, 1], 1).unwrap();
        let theta = net.params();
        let back = net.with_params(&theta).unwrap();
        assert_eq!(back.params(), theta);
        assert!(net.with_params(&theta[1..]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let net = Network::init(&[3, 7, 1], 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        net.save(&path).unwrap();
        assert_eq!(Network::load(&path).unwrap(), net);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let batch = random_batch(8, 2, 3);
        let net = Network::init(&[2, 4, 1], 3).unwrap();
        let w = ClassWeights::inverse_frequency(batch.labels()).unwrap();
        let prior = PositivePrior::Fixed(0.3);
        for spec in [
            LossSpec::bce(),
            LossSpec::mae().balanced(),
            LossSpec::surrogate(2.0).with_prior(prior).balanced(),
            LossSpec::generalized(1.0, 0.7).with_prior(prior),
            LossSpec::macro_soft(1.0),
        ] {
            let (_, grad) = backward(&net, &batch, &spec, &w).unwrap();
            let numeric = numeric_grad(&net, |n| backward(n, &batch, &spec, &w).unwrap().0);
            let err = max_rel_err(&grad, &numeric);
            assert!(err <= 1e-4, "{spec}: {err}");
        }
    }

    #[test]
    fn smoothed_grads_match_finite_differences() {
        let batch = random_batch(12, 3, 8);
        let net = Network::init(&[3, 5, 1], 8).unwrap();
        let (g0, g1) = smoothed_proportion_grads(&net, &batch).unwrap();
        let numeric = numeric_grad(&net, |n| {
            let sp = smoothed_proportions(&n.predict(&batch).unwrap(), batch.labels()).unwrap();
            sp.q0_tilde + sp.q1_tilde
        });
        assert!(max_rel_err(&g0.add(&g1), &numeric) <= 1e-4);
    }

    #[test]
    fn mae_gradient_is_twice_smoothed_gradients() {
        let batch = random_batch(16, 2, 4);
        let net = Network::init(&[2, 6, 1], 4).unwrap();
        let w = ClassWeights::inverse_frequency(batch.labels()).unwrap();
        let (_, grad) = backward(&net, &batch, &LossSpec::mae().balanced(), &w).unwrap();
        let (g0, g1) = smoothed_proportion_grads(&net, &batch).unwrap();
        let expected = g0.add(&g1).scaled(2.0);
        for (a, b) in grad.iter().zip(expected.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn saturated_correct_network_has_no_mae_gradient() {
        let single = Network::from_layers(vec![Layer {
            inputs: 1,
            outputs: 1,
            weights: vec![100.0],
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let batch = Dataset::new(vec![5.0, -5.0], vec![1, 0], 1).unwrap();
        let w = ClassWeights::inverse_frequency(batch.labels()).unwrap();
        let (loss, grad) = backward(&single, &batch, &LossSpec::mae().balanced(), &w).unwrap();
        assert!(loss < 1e-12);
        assert!(grad.norm() < 1e-12);
    }

    #[test]
    fn constant_network_grads_are_finite() {
        let batch = random_batch(10, 2, 1);
        let net = Network::constant(&[2, 3, 1], 0.5).unwrap();
        let (g0, g1) = smoothed_proportion_grads(&net, &batch).unwrap();
        assert!(g0.norm().is_finite() && g1.norm().is_finite());
        // only the output bias moves a constant ReLU network with zero weights
        let bias_idx = net.param_count() - 1;
        assert!(g0
            .iter()
            .enumerate()
            .all(|(j, &v)| j == bias_idx || v == 0.0));
        assert!((g0[bias_idx] + 0.25).abs() < 1e-15);
        assert!((g1[bias_idx] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn macro_soft_needs_both_classes() {
        let batch = Dataset::new(vec![0.0, 1.0], vec![1, 1], 1).unwrap();
        let net = Network::zeros(&[1, 1]).unwrap();
        let err = backward(
            &net,
            &batch,
            &LossSpec::macro_soft(1.0),
            &ClassWeights::uniform(),
        );
        assert!(err.unwrap_err().is_degenerate_class());
    }
}
