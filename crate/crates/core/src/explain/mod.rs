//! Feature attributions: gradient and reference-value baselines, and the set
//! explainers that optimize subset robustness directly.

mod banzhaf;
mod baselines;
mod greedy;

pub use banzhaf::{banzhaf_regression, exact_banzhaf, RegressionSolution, SubsetSample, DEFAULT_RIDGE};
pub use baselines::{eg_attr, grad_attr, ig_attr, loo_attr, random_attr};
pub use greedy::{
    greedy_as_select, greedy_as_select_with, greedy_select, greedy_select_with, objective_value, GreedyConfig, Memo,
    Objective, RobustnessObjective, Selection, SetFunction, SubsetSampling,
};

use crate::attack::FeatureSet;
use crate::{Error, Result};

/// Per-feature scores with a deterministic ranking: descending score, ties to
/// the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    scores: Vec<f64>,
    ranking: Vec<usize>,
    method: String,
}

impl Attribution {
    pub fn new(scores: Vec<f64>, method: impl Into<String>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("non-finite attribution score".into()));
        }
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(Self {
            scores,
            ranking,
            method: method.into(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The `k` highest-ranked features.
    pub fn top_k(&self, k: usize) -> Result<FeatureSet> {
        if k > self.len() {
            return Err(Error::invalid(format!("k = {k} exceeds dimension {}", self.len())));
        }
        FeatureSet::new(self.ranking[..k].to_vec(), self.len())
    }
}

pub fn attribution_to_set(attr: &Attribution, k: usize) -> Result<FeatureSet> {
    attr.top_k(k)
}
