//! Banzhaf values, exactly by enumeration and as the least-squares fit of a
//! linear model to a set function sampled over subsets.

use crate::linalg::cholesky_solve;
use crate::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;

const MAX_EXACT_PLAYERS: usize = 16;

/// One evaluated subset: `membership[j]` says whether player `j` is present.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSample {
    pub membership: Vec<bool>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSolution {
    pub w: Vec<f64>,
    pub c: f64,
}

/// Least-squares fit of `value ≈ w·b(S) + c`.
///
/// Solves the mean normal equations `(XᵀX/N) θ = Xᵀv/N` over the design
/// `X = [b(S) | 1]`. The system is factored with `ridge·I` added and then
/// refined (iterated Tikhonov), which converges to the exact least-squares
/// solution when the design has full column rank and to the minimum-norm one
/// otherwise.
pub fn banzhaf_regression(samples: &[SubsetSample], ridge: f64) -> Result<RegressionSolution> {
    if samples.len() < 2 {
        return Err(Error::invalid("regression needs at least two samples"));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::invalid("ridge must be positive"));
    }
    let n = samples[0].membership.len();
    for s in samples {
        if s.membership.len() != n {
            return Err(Error::dim("subset membership", n, s.membership.len()));
        }
        if !s.value.is_finite() {
            return Err(Error::Numeric("non-finite subset value".into()));
        }
    }
    let count = samples.len() as f64;
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / count;
    if samples.iter().all(|s| s.membership == samples[0].membership) {
        return Ok(RegressionSolution {
            w: vec![0.0; n],
            c: mean,
        });
    }

    let p = n + 1;
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut active = Vec::with_capacity(p);
    for s in samples {
        active.clear();
        active.extend(s.membership.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j));
        active.push(n);
        for &a in &active {
            rhs[a] += s.value;
            for &b in &active {
                gram[a * p + b] += 1.0;
            }
        }
    }
    gram.iter_mut().for_each(|g| *g /= count);
    rhs.iter_mut().for_each(|r| *r /= count);

    let mut damped = gram.clone();
    for i in 0..p {
        damped[i * p + i] += ridge;
    }
    let mut theta = vec![0.0; p];
    for _ in 0..12 {
        let residual: Vec<f64> = (0..p)
            .map(|i| rhs[i] - (0..p).map(|j| gram[i * p + j] * theta[j]).sum::<f64>())
            .collect();
        let step = cholesky_solve(&damped, &residual)
            .ok_or_else(|| Error::Numeric("regression normal equations are not positive definite".into()))?;
        let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        theta.iter_mut().zip(&step).for_each(|(t, s)| *t += s);
        let scale = theta.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if size <= 1e-15 * scale {
            break;
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("regression produced non-finite coefficients".into()));
    }
    let c = theta.pop().expect("intercept");
    Ok(RegressionSolution { w: theta, c })
}

/// `φ_i = 2^{-(n-1)} Σ_{S ⊆ U∖{i}} [v(S ∪ {i}) − v(S)]`, with subsets passed
/// to `value` as bitmasks over `n ≤ 16` players.
pub fn exact_banzhaf<F: Fn(u32) -> f64>(n: usize, value: F) -> Result<Vec<f64>> {
    if n > MAX_EXACT_PLAYERS {
        return Err(Error::invalid(format!(
            "exact Banzhaf enumeration supports at most {MAX_EXACT_PLAYERS} players, got {n}"
        )));
    }
    let table: Vec<f64> = (0..1u32 << n).map(&value).collect();
    let norm = 0.5f64.powi(n as i32 - 1);
    Ok((0..n)
        .map(|i| {
            let bit = 1u32 << i;
            let total: f64 = (0..1u32 << n)
                .filter(|s| s & bit == 0)
                .map(|s| table[(s | bit) as usize] - table[s as usize])
                .sum();
            total * norm
        })
        .collect())
}
