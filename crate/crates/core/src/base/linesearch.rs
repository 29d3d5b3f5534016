//! Armijo backtracking on the composite objective.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::problem::CompositeProblem;
use crate::error::{bail, Result};

/// Hard cap on the number of backtracking steps.
pub const MAX_BACKTRACKS: u32 = 64;

/// Slack allowed on `g_decrease` before it is treated as a broken surrogate.
pub const DECREASE_TOLERANCE: f64 = 1e-12;

/// Smallest `t ≥ 0` with `V(x + γ₀δᵗ d) ≤ V(x) + α γ₀δᵗ g_decrease`, returned as `γ₀δᵗ`.
pub fn armijo_linesearch<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    direction: &[f64],
    g_decrease: f64,
    alpha: f64,
    delta: f64,
    gamma0: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && delta > 0.0 && delta < 1.0) {
        bail!(Config, "Armijo needs alpha, delta in (0,1)");
    }
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        bail!(Config, "Armijo gamma0 must lie in (0,1], got {gamma0}");
    }
    if g_decrease > DECREASE_TOLERANCE * (1.0 + problem.value(x).abs()) {
        bail!(Contract, "direction is not a descent direction: g_decrease = {g_decrease:e}");
    }
    let v0 = problem.value(x);
    let mut gamma = gamma0;
    let mut trial: Vec<f64> = x.to_vec();
    for _ in 0..=MAX_BACKTRACKS {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(direction) {
            *t = xi + gamma * di;
        }
        if problem.value(&trial) <= v0 + alpha * gamma * g_decrease {
            return Ok(gamma);
        }
        gamma *= delta;
    }
    bail!(LineSearch, "no acceptable step after {MAX_BACKTRACKS} backtracks")
}

/// Whether the sufficient-decrease inequality holds for the given `γ`.
pub fn armijo_holds<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    direction: &[f64],
    g_decrease: f64,
    alpha: f64,
    gamma: f64,
) -> bool {
    let trial: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + gamma * d).collect();
    problem.value(&trial) <= problem.value(x) + alpha * gamma * g_decrease
}
