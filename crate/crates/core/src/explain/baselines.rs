use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Attribution;
use crate::model::{Model, ScalarHead};
use crate::{Error, Result};

fn check_len(model: &Model, what: &str, v: &[f64]) -> Result<()> {
    if v.len() != model.input_dim() {
        return Err(Error::dim(what, model.input_dim(), v.len()));
    }
    Ok(())
}

/// Absolute input gradient of the predicted-class logit.
pub fn grad_attr(model: &Model, x: &[f64]) -> Result<Attribution> {
    let tape = model.tape(x)?;
    let y = tape.predict();
    let g = tape.gradient(ScalarHead::Logit(y))?;
    Attribution::new(g.into_iter().map(f64::abs).collect(), "grad")
}

/// Integrated gradients of the predicted-class logit along the straight path
/// from `baseline`, midpoint rule with `m_steps` nodes.
pub fn ig_attr(model: &Model, x: &[f64], baseline: &[f64], m_steps: usize) -> Result<Attribution> {
    check_len(model, "ig baseline", baseline)?;
    if m_steps == 0 {
        return Err(Error::invalid("ig needs at least one step"));
    }
    let y = model.predict(x)?;
    let diff: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let mut avg = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for k in 0..m_steps {
        let alpha = (k as f64 + 0.5) / m_steps as f64;
        for ((p, b), d) in point.iter_mut().zip(baseline).zip(&diff) {
            *p = b + alpha * d;
        }
        let g = model.input_gradient(&point, ScalarHead::Logit(y))?;
        for (a, gi) in avg.iter_mut().zip(g) {
            *a += gi;
        }
    }
    let scores = diff.iter().zip(&avg).map(|(d, a)| d * (a / m_steps as f64)).collect();
    Attribution::new(scores, "ig")
}

/// Expected gradients: IG with the baseline drawn uniformly from `background`
/// and the path position drawn uniformly from (0,1), averaged over samples.
pub fn eg_attr(
    model: &Model,
    x: &[f64],
    background: &[Vec<f64>],
    num_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    if background.is_empty() {
        return Err(Error::invalid("expected gradients needs a non-empty background"));
    }
    if num_samples == 0 {
        return Err(Error::invalid("expected gradients needs at least one sample"));
    }
    for b in background {
        check_len(model, "eg background", b)?;
    }
    let y = model.predict(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for _ in 0..num_samples {
        let base = &background[rng.random_range(0..background.len())];
        let alpha: f64 = rng.random();
        for ((p, b), xi) in point.iter_mut().zip(base).zip(x) {
            *p = b + alpha * (xi - b);
        }
        let g = model.input_gradient(&point, ScalarHead::Logit(y))?;
        for (((a, gi), xi), b) in acc.iter_mut().zip(g).zip(x).zip(base) {
            *a += (xi - b) * gi;
        }
    }
    let n = num_samples as f64;
    Attribution::new(acc.into_iter().map(|a| a / n).collect(), "eg")
}

/// Leave-one-out: drop in the predicted-class logit when one coordinate is
/// replaced by its reference value.
pub fn loo_attr(model: &Model, x: &[f64], reference: &[f64]) -> Result<Attribution> {
    check_len(model, "loo reference", reference)?;
    let z = model.forward(x)?;
    let y = crate::model::argmax(&z);
    let mut probe = x.to_vec();
    let mut scores = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = reference[i];
        scores.push(z[y] - model.forward(&probe)?[y]);
        probe[i] = x[i];
    }
    Attribution::new(scores, "loo")
}

/// Seeded uniform shuffle of `0..d` used as scores.
pub fn random_attr(d: usize, seed: u64) -> Result<Attribution> {
    if d == 0 {
        return Err(Error::invalid("random attribution needs d >= 1"));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Attribution::new(perm.into_iter().map(|p| p as f64).collect(), "random")
}
