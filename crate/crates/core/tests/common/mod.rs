#![allow(dead_code)]

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use robex::data::{digits8x8, holdout_split, Example};
use robex::harness::{train_model, RunConfig, TrainSummary};
use robex::model::{Activation, Layer, Model};

pub struct Digits {
    pub examples: Vec<Example>,
    pub model: Model,
    pub summary: TrainSummary,
}

impl Digits {
    pub fn train(&self) -> &[Example] {
        holdout_split(&self.examples, RunConfig::default().test_fraction).0
    }

    pub fn test(&self) -> &[Example] {
        holdout_split(&self.examples, RunConfig::default().test_fraction).1
    }

    /// The first `n` correctly classified test examples.
    pub fn correct_test(&self, n: usize) -> Vec<Example> {
        self.test()
            .iter()
            .filter(|e| self.model.predict(&e.x).unwrap() == e.label)
            .take(n)
            .cloned()
            .collect()
    }
}

/// The bundled digits, shuffled as `gen-data --seed 0` does, and the model
/// `train --seed 0` produces from them.
pub fn digits() -> &'static Digits {
    static CELL: OnceLock<Digits> = OnceLock::new();
    CELL.get_or_init(|| {
        let examples = digits8x8(1797, 0);
        let (model, summary) = train_model(&examples, &RunConfig::default()).unwrap();
        Digits {
            examples,
            model,
            summary,
        }
    })
}

pub fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_linear<R: Rng>(rng: &mut R, d: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows = (0..classes).map(|_| normal_vec(rng, d)).collect();
    let bias = normal_vec(rng, classes);
    (rows, bias)
}

/// A random ReLU network with the given layer widths.
pub fn random_mlp<R: Rng>(rng: &mut R, widths: &[usize]) -> Model {
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let act = if k + 2 == widths.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            let weights = normal_vec(rng, w[0] * w[1])
                .into_iter()
                .map(|v| v / (w[0] as f64).sqrt())
                .collect();
            let bias = normal_vec(rng, w[1]).into_iter().map(|v| 0.1 * v).collect();
            Layer::new(w[0], w[1], weights, bias, act).unwrap()
        })
        .collect();
    Model::new(layers).unwrap()
}

/// Nonempty random subset of `0..d` with each index kept with probability `p`.
pub fn random_subset<R: Rng>(rng: &mut R, d: usize, p: f64) -> robex::FeatureSet {
    loop {
        let mask: Vec<bool> = (0..d).map(|_| rng.random_bool(p)).collect();
        if mask.iter().any(|&m| m) {
            return robex::FeatureSet::from_mask(&mask);
        }
    }
}
