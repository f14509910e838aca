//! Fixtures shared by the benchmarks.

use fbeta_core::data::generate;
use fbeta_core::{ClassWeights, Dataset, Network, SynthSpec};

/// Synthetic batch of `n` rows in `dim` dimensions with 10% positives.
pub fn batch(n: usize, dim: usize) -> Dataset {
    generate(&SynthSpec {
        dim,
        n,
        positive_fraction: 0.1,
        mean_separation: 4.0,
        noise_rate: 0.0,
        seed: 42,
    })
    .expect("valid fixture")
}

/// Network with one hidden layer of `hidden` units and its class weights on `data`.
pub fn network(data: &Dataset, hidden: usize) -> (Network, ClassWeights) {
    let net = Network::init(&[data.dim(), hidden, 1], 7).expect("valid shape");
    let weights = ClassWeights::inverse_frequency(data.labels()).expect("both classes");
    (net, weights)
}

/// Scores in (0, 1) paired with labels, for metric and loss benches.
pub fn scores(data: &Dataset, net: &Network) -> Vec<f64> {
    net.predict(data).expect("matching dims")
}
