//! Evaluation criteria for attributions.
//!
//! Each curve takes, for a list of fractions, the top-`⌈φ·d⌉` features of each
//! example's attribution as the relevant set and averages a per-example value
//! over the examples. Examples are processed in parallel, but every example's
//! randomness is derived from `(seed, example index)` and reductions run in
//! index order, so results do not depend on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{min_perturbation, AttackConfig, AttackGoal, FeatureSet};
use crate::data::Example;
use crate::explain::Attribution;
use crate::model::{argmax, softmax_probs, Model};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Minimal perturbation norm on the irrelevant features (higher is better).
    RobustnessSbar,
    /// Minimal perturbation norm on the relevant features (lower is better).
    RobustnessS,
    Insertion,
    Deletion,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::RobustnessSbar,
        Criterion::RobustnessS,
        Criterion::Insertion,
        Criterion::Deletion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::RobustnessSbar => "robustness_sbar",
            Criterion::RobustnessS => "robustness_s",
            Criterion::Insertion => "insertion",
            Criterion::Deletion => "deletion",
        }
    }

    pub fn parse(s: &str) -> Option<Criterion> {
        Criterion::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Whether a larger area under the curve means a better explanation.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Criterion::RobustnessSbar | Criterion::Insertion)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub criterion: Criterion,
    /// `(fraction, mean value)`, fractions strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Examples that contributed to every point.
    pub n_examples: usize,
    /// Examples skipped because the goal already held at the clean input.
    pub n_skipped: usize,
    /// Attacks that hit the radius cap, summed over points.
    pub n_capped: Vec<usize>,
}

/// Trapezoidal area `Σ (y_i + y_{i−1})/2 · (x_i − x_{i−1})`.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("AUC needs at least two points"));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("AUC abscissae must be strictly increasing"));
    }
    Ok(points
        .windows(2)
        .map(|w| (w[1].1 + w[0].1) / 2.0 * (w[1].0 - w[0].0))
        .sum())
}

/// Default fractions 0.05, 0.10, …, 0.45.
pub fn default_fractions() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 20.0).collect()
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::Config("fractions must not be empty".into()));
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
        return Err(Error::Config("fractions must lie in (0, 1)".into()));
    }
    if fractions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("fractions must be strictly increasing".into()));
    }
    Ok(())
}

/// Number of features for a fraction, `⌈φ·d⌉`.
pub fn top_count(fraction: f64, d: usize) -> usize {
    ((fraction * d as f64 - 1e-9).ceil().max(0.0) as usize).min(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub fractions: Vec<f64>,
    /// `None` attacks each example untargeted away from its prediction.
    pub target: Option<usize>,
    pub attack: AttackConfig,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            fractions: default_fractions(),
            target: None,
            attack: AttackConfig::default(),
        }
    }
}

/// The attack goal for an example, or `None` if the example is skipped:
/// misclassified examples for untargeted goals, examples already predicted as
/// the target for targeted ones.
pub fn goal_for(model: &Model, ex: &Example, target: Option<usize>) -> Result<Option<AttackGoal>> {
    let pred = model.predict(&ex.x)?;
    Ok(match target {
        None if pred == ex.label => Some(AttackGoal::Untargeted { original: pred }),
        None => None,
        Some(t) if t != pred => Some(AttackGoal::Targeted { target: t }),
        Some(_) => None,
    })
}

fn check_attributions(model: &Model, examples: &[Example], attributions: &[Attribution]) -> Result<()> {
    if examples.len() != attributions.len() {
        return Err(Error::dim(
            "attributions per example",
            examples.len(),
            attributions.len(),
        ));
    }
    for a in attributions {
        if a.len() != model.input_dim() {
            return Err(Error::dim("attribution length", model.input_dim(), a.len()));
        }
    }
    Ok(())
}

fn finish_curve(
    criterion: Criterion,
    fractions: &[f64],
    per_example: Vec<Vec<(f64, bool)>>,
    n_skipped: usize,
) -> Result<EvalCurve> {
    let n = per_example.len();
    if n == 0 {
        return Err(Error::invalid("no example is eligible for evaluation"));
    }
    let mut points = Vec::with_capacity(fractions.len());
    let mut n_capped = Vec::with_capacity(fractions.len());
    for (k, &f) in fractions.iter().enumerate() {
        let sum: f64 = per_example.iter().map(|row| row[k].0).sum();
        points.push((f, sum / n as f64));
        n_capped.push(per_example.iter().filter(|row| row[k].1).count());
    }
    let area = if points.len() >= 2 { auc(&points)? } else { 0.0 };
    Ok(EvalCurve {
        criterion,
        points,
        auc: area,
        n_examples: n,
        n_skipped,
        n_capped,
    })
}

/// Robustness-S̄r or Robustness-Sr curve.
pub fn robustness_curve(
    model: &Model,
    examples: &[Example],
    attributions: &[Attribution],
    mode: Criterion,
    config: &CriteriaConfig,
) -> Result<EvalCurve> {
    if !matches!(mode, Criterion::RobustnessSbar | Criterion::RobustnessS) {
        return Err(Error::invalid(format!("{} is not a robustness criterion", mode.name())));
    }
    check_fractions(&config.fractions)?;
    check_attributions(model, examples, attributions)?;
    config.attack.validate()?;
    let d = model.input_dim();
    let cap = config.attack.eps_cap_for(d);

    let rows: Vec<Option<Vec<(f64, bool)>>> = examples
        .par_iter()
        .zip(attributions)
        .map(|(ex, attr)| {
            let Some(goal) = goal_for(model, ex, config.target)? else {
                return Ok(None);
            };
            config
                .fractions
                .iter()
                .map(|&f| {
                    let relevant = attr.top_k(top_count(f, d))?;
                    let perturbed = match mode {
                        Criterion::RobustnessSbar => relevant.complement(),
                        _ => relevant,
                    };
                    if perturbed.is_empty() {
                        return Ok((cap, true));
                    }
                    let r = min_perturbation(model, &ex.x, &perturbed, goal, &config.attack)?;
                    Ok((r.norm, r.capped))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    finish_curve(mode, &config.fractions, rows.into_iter().flatten().collect(), skipped)
}

/// Stand-in values for removed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Scalar {
        value: f64,
    },
    PerFeature {
        values: Vec<f64>,
    },
    /// One uniform draw per example, shared by all fractions.
    UniformRandom {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl ReferenceSpec {
    /// The reference vector for the example at `index`.
    pub fn resolve(&self, d: usize, index: usize) -> Result<Vec<f64>> {
        match self {
            ReferenceSpec::Scalar { value } => Ok(vec![*value; d]),
            ReferenceSpec::PerFeature { values } => {
                if values.len() != d {
                    return Err(Error::dim("reference values", d, values.len()));
                }
                Ok(values.clone())
            }
            ReferenceSpec::UniformRandom { lo, hi, seed } => {
                if !(lo <= hi) {
                    return Err(Error::Config("uniform reference needs lo <= hi".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(index as u64);
                let dist =
                    Uniform::new_inclusive(*lo, *hi).map_err(|e| Error::Config(format!("uniform reference: {e}")))?;
                Ok((0..d).map(|_| dist.sample(&mut rng)).collect())
            }
        }
    }
}

/// `f(x'_S; x_S̄)`: the class probability with `s` replaced by the reference.
pub fn deletion_score(model: &Model, x: &[f64], reference: &[f64], s: &FeatureSet, class: usize) -> Result<f64> {
    let mut probe = x.to_vec();
    for &i in s.indices() {
        probe[i] = reference[i];
    }
    Ok(softmax_probs(&model.forward(&probe)?)[class])
}

/// `f(x_S; x'_S̄)`: the class probability keeping only `s`.
pub fn insertion_score(model: &Model, x: &[f64], reference: &[f64], s: &FeatureSet, class: usize) -> Result<f64> {
    let mut probe = reference.to_vec();
    for &i in s.indices() {
        probe[i] = x[i];
    }
    Ok(softmax_probs(&model.forward(&probe)?)[class])
}

/// Insertion or Deletion curve of the originally predicted class probability.
pub fn insertion_deletion_curve(
    model: &Model,
    examples: &[Example],
    attributions: &[Attribution],
    mode: Criterion,
    reference: &ReferenceSpec,
    fractions: &[f64],
) -> Result<EvalCurve> {
    if !matches!(mode, Criterion::Insertion | Criterion::Deletion) {
        return Err(Error::invalid(format!("{} is not insertion/deletion", mode.name())));
    }
    check_fractions(fractions)?;
    check_attributions(model, examples, attributions)?;
    let d = model.input_dim();

    let rows: Vec<Option<Vec<(f64, bool)>>> = examples
        .par_iter()
        .zip(attributions)
        .enumerate()
        .map(|(idx, (ex, attr))| {
            let pred = model.predict(&ex.x)?;
            if pred != ex.label {
                return Ok(None);
            }
            let r = reference.resolve(d, idx)?;
            fractions
                .iter()
                .map(|&f| {
                    let s = attr.top_k(top_count(f, d))?;
                    let v = match mode {
                        Criterion::Deletion => deletion_score(model, &ex.x, &r, &s, pred)?,
                        _ => insertion_score(model, &ex.x, &r, &s, pred)?,
                    };
                    Ok((v, false))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    finish_curve(mode, fractions, rows.into_iter().flatten().collect(), skipped)
}

/// `1 − min_y |Φ(y) ∩ Φ(x)| / |Φ(x)|` over `num_samples` points drawn
/// uniformly from the L2 ball of radius `radius` around `x`.
pub fn sensitivity<F>(explain: F, x: &[f64], radius: f64, num_samples: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<FeatureSet>,
{
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid("sensitivity radius must be non-negative"));
    }
    let base = explain(x)?;
    if base.is_empty() {
        return Err(Error::invalid("explanation set at x is empty"));
    }
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("unit interval");
    let mut worst = 1.0f64;
    let mut y = vec![0.0; d];
    for _ in 0..num_samples {
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = radius * unit.sample(&mut rng).powf(1.0 / d as f64);
        let scale = if len > 0.0 { r / len } else { 0.0 };
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&dir) {
            *yi = xi + scale * di;
        }
        let s = explain(&y)?;
        let shared = s.indices().iter().filter(|&&i| base.contains(i)).count();
        worst = worst.min(shared as f64 / base.len() as f64);
    }
    Ok(1.0 - worst)
}

/// Average ranks (1-based) of `scores` in descending order; ties share the
/// mean of their positions.
fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation of the score-induced rankings, with average ranks for
/// ties. Identical rank vectors give exactly 1; a constant ranking against a
/// different one gives 0.
pub fn spearman_rank_correlation(a: &Attribution, b: &Attribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("attribution length", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty attributions"));
    }
    let ra = average_ranks(a.scores());
    let rb = average_ranks(b.scores());
    if ra == rb {
        return Ok(1.0);
    }
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SanityReport {
    pub per_example: Vec<f64>,
    pub mean: f64,
}

/// Rank correlation between explanations of the model and of a copy whose
/// last layer is re-initialized with `seed`.
pub fn sanity_check<F>(model: &Model, examples: &[Example], explain: F, seed: u64) -> Result<SanityReport>
where
    F: Fn(&Model, &[f64]) -> Result<Attribution> + Sync,
{
    if examples.is_empty() {
        return Err(Error::invalid("sanity check needs examples"));
    }
    let randomized = model.randomize_last_layer(seed);
    let per_example: Vec<f64> = examples
        .par_iter()
        .map(|ex| spearman_rank_correlation(&explain(model, &ex.x)?, &explain(&randomized, &ex.x)?))
        .collect::<Result<_>>()?;
    let mean = per_example.iter().sum::<f64>() / per_example.len() as f64;
    Ok(SanityReport { per_example, mean })
}

/// Predicted class index, re-exported for callers composing criteria.
pub fn predicted_class(logits: &[f64]) -> usize {
    argmax(logits)
}
