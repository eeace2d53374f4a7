//! Adversarial perturbations restricted to a feature subset.
//!
//! [`pgd_fixed_eps`] searches for a misclassifying perturbation inside an L2
//! ball whose coordinates outside the subset are held at exactly zero.
//! [`min_perturbation`] wraps it in a doubling + bisection search over the
//! radius, giving an upper bound on the minimal perturbation norm.
//! [`linear_min_perturbation`] is the exact answer for linear models and is
//! what the attack is tested against.

use serde::{Deserialize, Serialize};

use crate::linalg::cholesky_solve;
use crate::model::{argmax, Model, ScalarHead, Tape};
use crate::{Error, Result};

/// A subset of feature indices `{0..dim-1}`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    indices: Vec<usize>,
    dim: usize,
}

impl FeatureSet {
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::invalid(format!(
                "feature index {bad} out of range for dimension {dim}"
            )));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate feature index"));
        }
        Ok(Self { indices, dim })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            dim,
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
            dim,
        }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            indices: mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect(),
            dim: mask.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Self {
        let mask = self.mask();
        Self {
            indices: (0..self.dim).filter(|&i| !mask[i]).collect(),
            dim: self.dim,
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    /// Union of two sets over the same dimension.
    pub fn union(&self, other: &FeatureSet) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        indices.sort_unstable();
        indices.dedup();
        Self { indices, dim: self.dim }
    }

    pub fn with(&self, i: usize) -> Self {
        let mut out = self.clone();
        if let Err(pos) = out.indices.binary_search(&i) {
            out.indices.insert(pos, i);
        }
        out
    }
}

/// Success condition for an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackGoal {
    /// Any prediction other than `original`.
    Untargeted { original: usize },
    /// Prediction equal to `target`.
    Targeted { target: usize },
}

impl AttackGoal {
    pub fn is_met(&self, logits: &[f64]) -> bool {
        match *self {
            AttackGoal::Untargeted { original } => argmax(logits) != original,
            AttackGoal::Targeted { target } => argmax(logits) == target,
        }
    }

    /// The head whose ascent drives the attack.
    pub fn head(&self) -> ScalarHead {
        match *self {
            AttackGoal::Untargeted { original } => ScalarHead::Margin(original),
            AttackGoal::Targeted { target } => ScalarHead::TargetMargin(target),
        }
    }

    fn check(&self, num_classes: usize) -> Result<()> {
        let c = match *self {
            AttackGoal::Untargeted { original } => original,
            AttackGoal::Targeted { target } => target,
        };
        if c >= num_classes {
            return Err(Error::invalid(format!(
                "goal class {c} out of range for {num_classes} classes"
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid("attacks need at least two classes"));
        }
        Ok(())
    }
}

pub const RIVAL_SWEEP: usize = 1;

const MAX_HALVINGS: usize = 64;

/// Settings for the L2 attack. `eps_cap` defaults to `2·√d` when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub step_size: f64,
    pub num_steps: usize,
    pub binsearch_iters: usize,
    pub eps_cap: Option<f64>,
    pub clip_box: Option<(f64, f64)>,
    /// For untargeted goals with more than two classes, retry a failed run
    /// against up to this many competing classes, nearest first by linearized
    /// boundary distance, using each class's pairwise margin.
    pub rival_sweep: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            num_steps: 100,
            binsearch_iters: 12,
            eps_cap: None,
            clip_box: None,
            rival_sweep: RIVAL_SWEEP,
        }
    }
}

impl AttackConfig {
    pub fn eps_cap_for(&self, dim: usize) -> f64 {
        self.eps_cap.unwrap_or(2.0 * (dim as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("attack step_size must be positive".into()));
        }
        if self.num_steps == 0 || self.binsearch_iters == 0 {
            return Err(Error::Config(
                "attack num_steps and binsearch_iters must be positive".into(),
            ));
        }
        if let Some(cap) = self.eps_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(Error::Config("attack eps_cap must be positive".into()));
            }
        }
        if let Some((lo, hi)) = self.clip_box {
            if !(lo <= hi) {
                return Err(Error::Config("attack clip_box needs lo <= hi".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Zero (bitwise) outside the perturbed subset.
    pub delta: Vec<f64>,
    /// `‖delta‖₂`, except for capped results, which report the cap.
    pub norm: f64,
    pub success: bool,
    /// Prediction at `x + delta`.
    pub achieved_class: usize,
    /// The search reached the cap without success.
    pub capped: bool,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn check_inputs(model: &Model, x: &[f64], s: &FeatureSet, goal: AttackGoal) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::dim("attack input", model.input_dim(), x.len()));
    }
    if s.dim() != model.input_dim() {
        return Err(Error::dim("feature set dimension", model.input_dim(), s.dim()));
    }
    if s.is_empty() {
        return Err(Error::invalid("attack feature set is empty"));
    }
    goal.check(model.num_classes())
}

struct Run {
    delta: Vec<f64>,
    success: bool,
    class: usize,
}

/// Normalized-gradient ascent on `head`, projected onto the subset-restricted
/// ball, stopping at the first iterate where `goal` holds.
#[allow(clippy::too_many_arguments)]
fn run_pgd(
    model: &Model,
    x: &[f64],
    s: &FeatureSet,
    goal: AttackGoal,
    eps: f64,
    cfg: &AttackConfig,
    head: ScalarHead,
    start: &Tape<'_>,
) -> Result<Run> {
    let mut delta = vec![0.0; x.len()];
    let mut point = x.to_vec();
    let mut prev = vec![0.0; s.len()];
    let mut owned: Option<Tape<'_>> = None;
    let mut class = start.predict();

    for _ in 0..cfg.num_steps {
        let tape = owned.as_ref().unwrap_or(start);
        let g = tape.gradient(head)?;
        let gnorm = s.indices().iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
        if !(gnorm > 0.0 && gnorm.is_finite()) {
            break;
        }
        for (p, &i) in prev.iter_mut().zip(s.indices()) {
            *p = delta[i];
            delta[i] += cfg.step_size * g[i] / gnorm;
        }
        let n = s.indices().iter().map(|&i| delta[i] * delta[i]).sum::<f64>().sqrt();
        if n > eps {
            let scale = eps / n;
            for &i in s.indices() {
                delta[i] *= scale;
            }
        }
        if let Some((lo, hi)) = cfg.clip_box {
            for &i in s.indices() {
                delta[i] = (x[i] + delta[i]).clamp(lo, hi) - x[i];
            }
        }
        for &i in s.indices() {
            point[i] = x[i] + delta[i];
        }
        let next = model.tape(&point)?;
        class = next.predict();
        if goal.is_met(next.logits()) {
            return Ok(Run {
                delta,
                success: true,
                class,
            });
        }
        owned = Some(next);
        // A fixed point of the update map repeats forever.
        let moved = prev
            .iter()
            .zip(s.indices())
            .map(|(p, &i)| (p - delta[i]).abs())
            .fold(0.0, f64::max);
        if moved <= 1e-9 * eps {
            break;
        }
    }
    Ok(Run {
        delta,
        success: false,
        class,
    })
}

/// PGD with a fixed radius `eps`. The returned `delta` is the first iterate
/// meeting the goal, or the last iterate if none does.
pub fn pgd_fixed_eps(
    model: &Model,
    x: &[f64],
    s: &FeatureSet,
    goal: AttackGoal,
    eps: f64,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    check_inputs(model, x, s, goal)?;
    cfg.validate()?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("radius must be non-negative, got {eps}")));
    }
    let start = model.tape(x)?;
    pgd_from(model, x, s, goal, eps, cfg, &start)
}

fn pgd_from(
    model: &Model,
    x: &[f64],
    s: &FeatureSet,
    goal: AttackGoal,
    eps: f64,
    cfg: &AttackConfig,
    start: &Tape<'_>,
) -> Result<AttackResult> {
    let finish = |run: Run| {
        let norm = l2(&run.delta);
        AttackResult {
            delta: run.delta,
            norm,
            success: run.success,
            achieved_class: run.class,
            capped: false,
        }
    };
    if goal.is_met(start.logits()) || eps == 0.0 {
        return Ok(finish(Run {
            delta: vec![0.0; x.len()],
            success: goal.is_met(start.logits()),
            class: start.predict(),
        }));
    }

    let first = run_pgd(model, x, s, goal, eps, cfg, goal.head(), start)?;
    if first.success {
        return Ok(finish(first));
    }
    if let AttackGoal::Untargeted { original } = goal {
        if cfg.rival_sweep > 0 && model.num_classes() > 2 {
            for j in nearest_rivals(s, original, start)?.into_iter().take(cfg.rival_sweep) {
                let head = ScalarHead::Pairwise {
                    plus: j,
                    minus: original,
                };
                let run = run_pgd(model, x, s, goal, eps, cfg, head, start)?;
                if run.success {
                    return Ok(finish(run));
                }
            }
        }
    }
    Ok(finish(first))
}

/// Classes other than `original`, ordered by the first-order distance
/// `(z_y − z_j) / ‖∇_S (z_y − z_j)‖` to their boundary with `original`.
fn nearest_rivals(s: &FeatureSet, original: usize, start: &Tape<'_>) -> Result<Vec<usize>> {
    let logits = start.logits();
    let mut ranked = Vec::with_capacity(logits.len());
    for j in (0..logits.len()).filter(|&j| j != original) {
        let g = start.gradient(ScalarHead::Pairwise {
            plus: j,
            minus: original,
        })?;
        let gnorm = l2(&s.indices().iter().map(|&i| g[i]).collect::<Vec<_>>());
        let gap = logits[original] - logits[j];
        let dist = if gnorm > 0.0 { gap / gnorm } else { f64::INFINITY };
        ranked.push((j, dist));
    }
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(j, _)| j).collect())
}

/// Upper bound on the minimal L2 perturbation supported on `s` that meets
/// `goal`: radius doubling from a norm-scaled start (or halving, if the start
/// already succeeds) to bracket the boundary, then bisection.
///
/// If the goal already holds at `x` the result is the zero perturbation. If
/// no radius up to the cap succeeds, the result has `capped = true` and
/// reports the cap as its norm.
pub fn min_perturbation(
    model: &Model,
    x: &[f64],
    s: &FeatureSet,
    goal: AttackGoal,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    check_inputs(model, x, s, goal)?;
    cfg.validate()?;
    let start = model.tape(x)?;
    let d = x.len() as f64;
    let cap = cfg.eps_cap_for(x.len());

    let zero = pgd_from(model, x, s, goal, 0.0, cfg, &start)?;
    if zero.success {
        return Ok(zero);
    }

    let mut eps = (0.1 * (s.len() as f64 / d).sqrt() * l2(x) + 0.1).min(cap);
    let first = pgd_from(model, x, s, goal, eps, cfg, &start)?;
    let (mut lo, mut best) = if first.success {
        // No failing radius yet: halve until one fails, so the bisection
        // bracket is relative to the answer rather than to the start.
        let mut best = first;
        let mut lo = 0.0;
        for _ in 0..MAX_HALVINGS {
            let half = 0.5 * best.norm;
            let r = pgd_from(model, x, s, goal, half, cfg, &start)?;
            if !r.success {
                lo = half;
                break;
            }
            best = r;
        }
        (lo, best)
    } else {
        let mut lo = eps;
        let mut last = first;
        let best = loop {
            if eps >= cap {
                return Ok(AttackResult {
                    norm: cap,
                    capped: true,
                    ..last
                });
            }
            eps = (2.0 * eps).min(cap);
            let r = pgd_from(model, x, s, goal, eps, cfg, &start)?;
            if r.success {
                break r;
            }
            lo = eps;
            last = r;
        };
        (lo, best)
    };

    let mut hi = best.norm;
    for _ in 0..cfg.binsearch_iters {
        if hi <= lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = pgd_from(model, x, s, goal, mid, cfg, &start)?;
        if r.success {
            hi = r.norm;
            if r.norm < best.norm {
                best = r;
            }
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Exact minimal L2 perturbation on `s` for the linear classifier
/// `z = W x + b`, or `None` when no perturbation on `s` reaches the goal.
///
/// Decision-boundary ties count as reached.
pub fn linear_min_perturbation(
    weight_rows: &[Vec<f64>],
    bias: &[f64],
    x: &[f64],
    s: &FeatureSet,
    goal: AttackGoal,
) -> Result<Option<f64>> {
    let classes = weight_rows.len();
    if bias.len() != classes {
        return Err(Error::dim("linear bias", classes, bias.len()));
    }
    if let Some(r) = weight_rows.iter().find(|r| r.len() != x.len()) {
        return Err(Error::dim("linear weight row", x.len(), r.len()));
    }
    if s.dim() != x.len() {
        return Err(Error::dim("feature set dimension", x.len(), s.dim()));
    }
    goal.check(classes)?;

    let z: Vec<f64> = weight_rows
        .iter()
        .zip(bias)
        .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect();
    if goal.is_met(&z) {
        return Ok(Some(0.0));
    }
    let restricted_diff = |a: usize, b: usize| -> Vec<f64> {
        s.indices()
            .iter()
            .map(|&i| weight_rows[a][i] - weight_rows[b][i])
            .collect()
    };

    match goal {
        AttackGoal::Untargeted { original: y } => {
            let best = (0..classes)
                .filter(|&j| j != y)
                .filter_map(|j| {
                    let n = l2(&restricted_diff(y, j));
                    (n > 0.0).then(|| (z[y] - z[j]).max(0.0) / n)
                })
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
            Ok(best)
        }
        AttackGoal::Targeted { target: t } => {
            // Minimal-norm point of { δ : a_j·δ ≥ b_j ∀ j≠t }: it is the
            // minimal-norm solution of some linearly independent active set,
            // so enumerate active sets and keep the feasible candidates.
            let rivals: Vec<usize> = (0..classes).filter(|&j| j != t).collect();
            if rivals.len() > 20 {
                return Err(Error::invalid("targeted linear oracle supports at most 21 classes"));
            }
            let a: Vec<Vec<f64>> = rivals.iter().map(|&j| restricted_diff(t, j)).collect();
            let b: Vec<f64> = rivals.iter().map(|&j| z[j] - z[t]).collect();
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
            let feasible = |delta: &[f64]| {
                a.iter()
                    .zip(&b)
                    .all(|(aj, &bj)| dot(aj, delta) >= bj - 1e-9 * (1.0 + bj.abs()))
            };

            let mut best: Option<f64> = None;
            for subset in 0u32..(1 << rivals.len()) {
                let active: Vec<usize> = (0..rivals.len()).filter(|k| subset & (1 << k) != 0).collect();
                if active.iter().any(|&k| l2(&a[k]) == 0.0) {
                    continue;
                }
                let m = active.len();
                let mut gram = vec![0.0; m * m];
                for (p, &kp) in active.iter().enumerate() {
                    for (q, &kq) in active.iter().enumerate() {
                        gram[p * m + q] = dot(&a[kp], &a[kq]);
                    }
                }
                let rhs: Vec<f64> = active.iter().map(|&k| b[k]).collect();
                let Some(lambda) = cholesky_solve(&gram, &rhs) else {
                    continue;
                };
                let mut delta = vec![0.0; s.len()];
                for (l, &k) in lambda.iter().zip(&active) {
                    for (dv, av) in delta.iter_mut().zip(&a[k]) {
                        *dv += l * av;
                    }
                }
                if feasible(&delta) {
                    let n = l2(&delta);
                    best = Some(best.map_or(n, |v: f64| v.min(n)));
                }
            }
            Ok(best)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_linear() -> (Vec<Vec<f64>>, Vec<f64>, Model) {
        // z_0 = 3a + 4b, z_1 = 0: positive side means class 0.
        let rows = vec![vec![3.0, 4.0], vec![0.0, 0.0]];
        let bias = vec![0.0, 0.0];
        let model = Model::linear(&rows, &bias).unwrap();
        (rows, bias, model)
    }

    const X: [f64; 2] = [1.0, 1.0];
    const GOAL: AttackGoal = AttackGoal::Untargeted { original: 0 };

    #[test]
    fn feature_set_basics() {
        let s = FeatureSet::new(vec![3, 0], 5).unwrap();
        assert_eq!(s.indices(), &[0, 3]);
        assert_eq!(s.complement().indices(), &[1, 2, 4]);
        assert_eq!(s.with(2).indices(), &[0, 2, 3]);
        assert!(FeatureSet::new(vec![1, 1], 3).is_err());
        assert!(FeatureSet::new(vec![3], 3).is_err());
        assert_eq!(FeatureSet::from_mask(&s.mask()), s);
    }

    #[test]
    fn zero_radius_returns_zero_delta() {
        let (_, _, m) = binary_linear();
        let r = pgd_fixed_eps(&m, &X, &FeatureSet::full(2), GOAL, 0.0, &Default::default()).unwrap();
        assert!(!r.success);
        assert_eq!(r.delta, vec![0.0, 0.0]);
        let done = AttackGoal::Untargeted { original: 1 };
        let r = pgd_fixed_eps(&m, &X, &FeatureSet::full(2), done, 0.0, &Default::default()).unwrap();
        assert!(r.success && r.norm == 0.0);
    }

    #[test]
    fn fixed_radius_brackets_hyperplane_distance() {
        let (_, _, m) = binary_linear();
        let cfg = AttackConfig::default();
        let s = FeatureSet::full(2);
        assert!(pgd_fixed_eps(&m, &X, &s, GOAL, 1.5, &cfg).unwrap().success);
        assert!(!pgd_fixed_eps(&m, &X, &s, GOAL, 1.3, &cfg).unwrap().success);
    }

    #[test]
    fn min_perturbation_matches_closed_form() {
        let (_, _, m) = binary_linear();
        let cfg = AttackConfig::default();
        let full = min_perturbation(&m, &X, &FeatureSet::full(2), GOAL, &cfg).unwrap();
        assert!(full.success && (full.norm - 1.4).abs() <= 0.02 * 1.4, "{}", full.norm);
        let s0 = FeatureSet::new(vec![0], 2).unwrap();
        let r = min_perturbation(&m, &X, &s0, GOAL, &cfg).unwrap();
        assert!((r.norm - 7.0 / 3.0).abs() <= 0.02 * 7.0 / 3.0, "{}", r.norm);
        assert_eq!(r.delta[1].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn unreachable_subspace_is_capped() {
        let rows = vec![vec![3.0, 0.0], vec![0.0, 0.0]];
        let m = Model::linear(&rows, &[0.0, 0.0]).unwrap();
        let s = FeatureSet::new(vec![1], 2).unwrap();
        let cfg = AttackConfig::default();
        let r = min_perturbation(&m, &X, &s, GOAL, &cfg).unwrap();
        assert!(!r.success && r.capped);
        assert_eq!(r.norm, cfg.eps_cap_for(2));
        assert_eq!(linear_min_perturbation(&rows, &[0.0, 0.0], &X, &s, GOAL).unwrap(), None);
    }

    #[test]
    fn linear_oracle_cases() {
        let (rows, bias, _) = binary_linear();
        let full = FeatureSet::full(2);
        let v = linear_min_perturbation(&rows, &bias, &X, &full, GOAL).unwrap().unwrap();
        assert!((v - 1.4).abs() < 1e-12);
        let s1 = FeatureSet::new(vec![1], 2).unwrap();
        let v = linear_min_perturbation(&rows, &bias, &X, &s1, GOAL).unwrap().unwrap();
        assert!((v - 1.75).abs() < 1e-12);
        let wrong = AttackGoal::Untargeted { original: 1 };
        assert_eq!(
            linear_min_perturbation(&rows, &bias, &X, &full, wrong).unwrap(),
            Some(0.0)
        );
        // Binary targeted is the same hyperplane.
        let t = AttackGoal::Targeted { target: 1 };
        let v = linear_min_perturbation(&rows, &bias, &X, &full, t).unwrap().unwrap();
        assert!((v - 1.4).abs() < 1e-12);
    }

    #[test]
    fn targeted_oracle_handles_two_active_constraints() {
        // Class 0 must beat both 1 and 2; the optimum lies on both boundaries.
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let bias = vec![0.0, 0.0, 0.0];
        let x = [0.0, 0.0];
        let t = AttackGoal::Targeted { target: 0 };
        // z = (0,0,0): argmax is class 0 already.
        assert_eq!(
            linear_min_perturbation(&rows, &bias, &x, &FeatureSet::full(2), t).unwrap(),
            Some(0.0)
        );
        let bias = vec![-1.0, 0.0, 0.0];
        // Need a - b ≥ 1 and a + b ≥ 1: nearest point (1, 0).
        let v = linear_min_perturbation(&rows, &bias, &x, &FeatureSet::full(2), t)
            .unwrap()
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        // Only feature 1 may move: a = 0 so a - b ≥ 1 and a + b ≥ 1 conflict.
        let s1 = FeatureSet::new(vec![1], 2).unwrap();
        assert_eq!(linear_min_perturbation(&rows, &bias, &x, &s1, t).unwrap(), None);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let (_, _, m) = binary_linear();
        let cfg = AttackConfig::default();
        assert!(pgd_fixed_eps(&m, &X, &FeatureSet::empty(2), GOAL, 1.0, &cfg).is_err());
        assert!(pgd_fixed_eps(&m, &X, &FeatureSet::full(2), GOAL, -1.0, &cfg).is_err());
        assert!(min_perturbation(&m, &X, &FeatureSet::empty(2), GOAL, &cfg).is_err());
        assert!(min_perturbation(&m, &[1.0], &FeatureSet::full(2), GOAL, &cfg).is_err());
    }

    #[test]
    fn clip_box_keeps_point_inside() {
        let (_, _, m) = binary_linear();
        let cfg = AttackConfig {
            clip_box: Some((0.0, 1.0)),
            ..Default::default()
        };
        let x = [0.2, 0.3];
        let r = pgd_fixed_eps(&m, &x, &FeatureSet::full(2), GOAL, 1.0, &cfg).unwrap();
        // z_0 > 0 everywhere in the box interior except the origin corner.
        assert!(!r.success);
        for (xi, di) in x.iter().zip(&r.delta) {
            assert!((0.0..=1.0).contains(&(xi + di)));
        }
    }
}
