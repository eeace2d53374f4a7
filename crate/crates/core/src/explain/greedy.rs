//! Greedy set explainers over a set function.
//!
//! Both explainers grow a relevant set `S_r` from the empty set in batches.
//! Greedy ranks each unchosen feature by the objective of `S_r ∪ {i}`.
//! Greedy-AS ranks them by the regression (Banzhaf) coefficient of the
//! restricted game whose players are the unchosen features and whose value is
//! the objective of `S_r ∪ S` for random subsets `S`.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::banzhaf::{banzhaf_regression, SubsetSample, DEFAULT_RIDGE};
use super::Attribution;
use crate::attack::{min_perturbation, AttackConfig, AttackGoal, FeatureSet};
use crate::model::Model;
use crate::{Error, Result};

const MAX_EXHAUSTIVE_PLAYERS: usize = 20;

/// A real-valued function of a feature subset.
pub trait SetFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, set: &FeatureSet) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize robustness when only the complement of `S_r` may move.
    MaxRobustnessSbar,
    /// Minimize robustness when only `S_r` may move.
    MinRobustnessS,
}

impl Objective {
    pub fn maximizes(&self) -> bool {
        matches!(self, Objective::MaxRobustnessSbar)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::MaxRobustnessSbar => "max_robustness_sbar",
            Objective::MinRobustnessS => "min_robustness_s",
        }
    }
}

/// Minimal perturbation norm on the set the objective perturbs. An empty
/// perturbable set yields the attack cap.
pub fn objective_value(
    model: &Model,
    x: &[f64],
    relevant: &FeatureSet,
    objective: Objective,
    goal: AttackGoal,
    attack: &AttackConfig,
) -> Result<f64> {
    let perturbed = match objective {
        Objective::MaxRobustnessSbar => relevant.complement(),
        Objective::MinRobustnessS => relevant.clone(),
    };
    if perturbed.is_empty() {
        return Ok(attack.eps_cap_for(x.len()));
    }
    Ok(min_perturbation(model, x, &perturbed, goal, attack)?.norm)
}

/// [`objective_value`] as a [`SetFunction`].
pub struct RobustnessObjective<'a> {
    pub model: &'a Model,
    pub x: &'a [f64],
    pub objective: Objective,
    pub goal: AttackGoal,
    pub attack: AttackConfig,
}

impl SetFunction for RobustnessObjective<'_> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn value(&self, set: &FeatureSet) -> Result<f64> {
        objective_value(self.model, self.x, set, self.objective, self.goal, &self.attack)
    }
}

/// Memoizes a set function within one selection run. Missing entries of a
/// batch are evaluated in parallel; results come back in request order.
pub struct Memo<'f, F: ?Sized> {
    f: &'f F,
    cache: HashMap<Vec<usize>, f64>,
    evaluations: usize,
}

impl<'f, F: SetFunction + ?Sized> Memo<'f, F> {
    pub fn new(f: &'f F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn values(&mut self, sets: &[FeatureSet]) -> Result<Vec<f64>> {
        let mut pending: Vec<&FeatureSet> = Vec::new();
        let mut queued: HashSet<&[usize]> = HashSet::new();
        for s in sets {
            if !self.cache.contains_key(s.indices()) && queued.insert(s.indices()) {
                pending.push(s);
            }
        }
        let f = self.f;
        let fresh: Vec<f64> = pending.par_iter().map(|s| f.value(s)).collect::<Result<_>>()?;
        self.evaluations += fresh.len();
        for (s, v) in pending.into_iter().zip(fresh) {
            self.cache.insert(s.indices().to_vec(), v);
        }
        Ok(sets.iter().map(|s| self.cache[s.indices()]).collect())
    }

    /// Number of distinct sets evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSampling {
    /// Each unchosen feature joins independently with `subset_inclusion_prob`.
    Bernoulli,
    /// Every subset of the unchosen features (small problems only).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyConfig {
    pub objective: Objective,
    pub target_fraction: f64,
    pub step_fraction: f64,
    pub num_subset_samples: usize,
    pub subset_inclusion_prob: f64,
    pub seed: u64,
    pub goal: AttackGoal,
    pub sampling: SubsetSampling,
    pub ridge: f64,
}

impl GreedyConfig {
    pub fn new(objective: Objective, goal: AttackGoal) -> Self {
        Self {
            objective,
            target_fraction: 0.45,
            step_fraction: 0.05,
            num_subset_samples: 5000,
            subset_inclusion_prob: 0.5,
            seed: 0,
            goal,
            sampling: SubsetSampling::Bernoulli,
            ridge: DEFAULT_RIDGE,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        for (name, f) in [
            ("target_fraction", self.target_fraction),
            ("step_fraction", self.step_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {f}")));
            }
        }
        if !(self.subset_inclusion_prob > 0.0 && self.subset_inclusion_prob < 1.0) {
            return Err(Error::Config("subset_inclusion_prob must be in (0, 1)".into()));
        }
        if self.num_subset_samples < 2 {
            return Err(Error::Config("num_subset_samples must be at least 2".into()));
        }
        if d == 0 {
            return Err(Error::invalid("cannot select from zero features"));
        }
        Ok(())
    }

    /// `⌈target_fraction · d⌉`.
    pub fn target_size(&self, d: usize) -> usize {
        fraction_count(self.target_fraction, d)
    }

    /// Features added per iteration, `⌈step_fraction · d⌉`.
    pub fn batch_size(&self, d: usize) -> usize {
        fraction_count(self.step_fraction, d)
    }
}

/// `⌈f · d⌉`, clamped to `1..=d`; products within 1e-9 of an integer round to it.
pub(crate) fn fraction_count(f: f64, d: usize) -> usize {
    ((f * d as f64 - 1e-9).ceil() as usize).clamp(1, d.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Features in the order they were chosen.
    pub order: Vec<usize>,
    /// Earlier-selected features score higher; unselected features score 0.
    pub attribution: Attribution,
    /// Distinct subsets evaluated.
    pub evaluations: usize,
}

fn selection(order: Vec<usize>, d: usize, method: &str, evaluations: usize) -> Result<Selection> {
    let k = order.len();
    let mut scores = vec![0.0; d];
    for (pos, &i) in order.iter().enumerate() {
        scores[i] = (k - pos) as f64;
    }
    Ok(Selection {
        attribution: Attribution::new(scores, method)?,
        order,
        evaluations,
    })
}

/// Sorts `candidates` best-first by `key`; ties keep the lower index first.
fn rank_by(candidates: &mut [(usize, f64)], maximize: bool) {
    candidates.sort_by(|a, b| {
        let ord = if maximize {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        ord.then(a.0.cmp(&b.0))
    });
}

pub fn greedy_select_with<F: SetFunction + ?Sized>(f: &F, config: &GreedyConfig) -> Result<Selection> {
    let d = f.dim();
    config.validate(d)?;
    let target = config.target_size(d);
    let batch = config.batch_size(d);
    let mut memo = Memo::new(f);
    let mut chosen = FeatureSet::empty(d);
    let mut order = Vec::with_capacity(target);

    while order.len() < target {
        let unchosen = chosen.complement();
        let sets: Vec<FeatureSet> = unchosen.indices().iter().map(|&i| chosen.with(i)).collect();
        let values = memo.values(&sets)?;
        let mut ranked: Vec<(usize, f64)> = unchosen.indices().iter().copied().zip(values).collect();
        rank_by(&mut ranked, config.objective.maximizes());
        let take = batch.min(target - order.len());
        for &(i, _) in &ranked[..take] {
            order.push(i);
            chosen = chosen.with(i);
        }
    }
    selection(order, d, "greedy", memo.evaluations())
}

pub fn greedy_as_select_with<F: SetFunction + ?Sized>(f: &F, config: &GreedyConfig) -> Result<Selection> {
    let d = f.dim();
    config.validate(d)?;
    let target = config.target_size(d);
    let batch = config.batch_size(d);
    let mut memo = Memo::new(f);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen = FeatureSet::empty(d);
    let mut order = Vec::with_capacity(target);

    while order.len() < target {
        let players = chosen.complement();
        let m = players.len();
        let memberships: Vec<Vec<bool>> = match config.sampling {
            SubsetSampling::Exhaustive => {
                if m > MAX_EXHAUSTIVE_PLAYERS {
                    return Err(Error::invalid(format!(
                        "exhaustive subset sampling supports at most {MAX_EXHAUSTIVE_PLAYERS} unchosen features, got {m}"
                    )));
                }
                (0..1u64 << m)
                    .map(|s| (0..m).map(|j| s & (1 << j) != 0).collect())
                    .collect()
            }
            SubsetSampling::Bernoulli => (0..config.num_subset_samples)
                .map(|_| (0..m).map(|_| rng.random_bool(config.subset_inclusion_prob)).collect())
                .collect(),
        };
        let sets: Vec<FeatureSet> = memberships
            .iter()
            .map(|mem| {
                let mut idx = chosen.indices().to_vec();
                idx.extend(players.indices().iter().zip(mem).filter(|(_, &b)| b).map(|(&i, _)| i));
                FeatureSet::new(idx, d)
            })
            .collect::<Result<_>>()?;
        let values = memo.values(&sets)?;
        let samples: Vec<SubsetSample> = memberships
            .into_iter()
            .zip(values)
            .map(|(membership, value)| SubsetSample { membership, value })
            .collect();
        let fit = banzhaf_regression(&samples, config.ridge)?;

        let mut ranked: Vec<(usize, f64)> = players.indices().iter().copied().zip(fit.w).collect();
        rank_by(&mut ranked, config.objective.maximizes());
        let take = batch.min(target - order.len());
        for &(i, _) in &ranked[..take] {
            order.push(i);
            chosen = chosen.with(i);
        }
    }
    selection(order, d, "greedy-as", memo.evaluations())
}

/// Greedy on the subset-robustness objective of `config.objective`.
pub fn greedy_select(model: &Model, x: &[f64], config: &GreedyConfig, attack: &AttackConfig) -> Result<Selection> {
    let f = RobustnessObjective {
        model,
        x,
        objective: config.objective,
        goal: config.goal,
        attack: *attack,
    };
    greedy_select_with(&f, config)
}

/// Greedy-AS on the subset-robustness objective of `config.objective`.
pub fn greedy_as_select(model: &Model, x: &[f64], config: &GreedyConfig, attack: &AttackConfig) -> Result<Selection> {
    let f = RobustnessObjective {
        model,
        x,
        objective: config.objective,
        goal: config.goal,
        attack: *attack,
    };
    greedy_as_select_with(&f, config)
}
