//! Per-block strongly convex surrogates `F̃ᵢ(·|x)` and their best responses.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    /// `∇ᵢF(x)ᵀ(z − xᵢ) + (τᵢ/2)‖z − xᵢ‖²`.
    ProxLinear,
    /// `F(z, x₋ᵢ) + (τᵢ/2)‖z − xᵢ‖²`.
    BlockConvex,
    /// Keeps the convex part of a sum and linearizes the rest.
    SumUtility,
    /// Convex outer function composed with a linearized inner map.
    Composition,
    Custom,
}

/// A family of block surrogates.
///
/// `Cache` holds what every block needs at a given point (a gradient, a residual, margins),
/// computed once per iteration and refreshed after single-block changes.
pub trait SurrogateFamily<P: CompositeProblem>: Sync {
    type Cache: Clone + Send + Sync;

    fn kind(&self) -> SurrogateKind;

    fn prepare(&self, problem: &P, x: &[f64]) -> Self::Cache;

    /// Refresh `cache` after block `block` of `x` changed from `old`.
    fn update_cache(&self, problem: &P, cache: &mut Self::Cache, x: &[f64], _block: Range<usize>, _old: &[f64]) {
        *cache = self.prepare(problem, x);
    }

    /// `∇ᵢF(x)`.
    fn block_gradient(&self, problem: &P, cache: &Self::Cache, x: &[f64], block: Range<usize>, out: &mut [f64]);

    /// `x̂ᵢ(x)`, the minimizer of `F̃ᵢ(·|x) + gᵢ` over `Xᵢ`.
    fn best_response(
        &self,
        problem: &P,
        cache: &Self::Cache,
        x: &[f64],
        block: Range<usize>,
        tau: f64,
        out: &mut [f64],
    );

    /// `F̃ᵢ(z|x)`, without `gᵢ`.
    fn value(&self, problem: &P, x: &[f64], block: Range<usize>, tau: f64, z: &[f64]) -> f64;

    /// `∇F̃ᵢ(z|x)`.
    fn gradient(&self, problem: &P, x: &[f64], block: Range<usize>, tau: f64, z: &[f64], out: &mut [f64]);
}

/// The proximal-linear surrogate, valid for any problem with a block prox.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProxLinear;

impl<P: CompositeProblem> SurrogateFamily<P> for ProxLinear {
    type Cache = Vec<f64>;

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::ProxLinear
    }

    fn prepare(&self, problem: &P, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        problem.grad_f(x, &mut g);
        g
    }

    fn block_gradient(&self, _problem: &P, cache: &Vec<f64>, _x: &[f64], block: Range<usize>, out: &mut [f64]) {
        out.copy_from_slice(&cache[block]);
    }

    fn best_response(&self, problem: &P, cache: &Vec<f64>, x: &[f64], block: Range<usize>, tau: f64, out: &mut [f64]) {
        let v: Vec<f64> = x[block.clone()].iter().zip(&cache[block.clone()]).map(|(xi, gi)| xi - gi / tau).collect();
        problem.prox_block(block, &v, 1.0 / tau, out);
    }

    fn value(&self, problem: &P, x: &[f64], block: Range<usize>, tau: f64, z: &[f64]) -> f64 {
        let mut g = vec![0.0; block.len()];
        problem.block_grad_f(x, block.clone(), &mut g);
        let d: Vec<f64> = z.iter().zip(&x[block]).map(|(a, b)| a - b).collect();
        problem.eval_f(x) + dot(&g, &d) + 0.5 * tau * dot(&d, &d)
    }

    fn gradient(&self, problem: &P, x: &[f64], block: Range<usize>, tau: f64, z: &[f64], out: &mut [f64]) {
        problem.block_grad_f(x, block.clone(), out);
        for ((o, zi), xi) in out.iter_mut().zip(z).zip(&x[block]) {
            *o += tau * (zi - xi);
        }
    }
}

/// `x̂ᵢ` of the proximal-linear surrogate: `prox_{gᵢ/τ}(xᵢ − ∇ᵢF(x)/τ)` over `Xᵢ`.
pub fn best_response_prox_linear<P: CompositeProblem + ?Sized>(
    problem: &P,
    block: Range<usize>,
    x: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        bail!(Domain, "tau must be positive, got {tau}");
    }
    let mut g = vec![0.0; block.len()];
    problem.block_grad_f(x, block.clone(), &mut g);
    let v: Vec<f64> = x[block.clone()].iter().zip(&g).map(|(xi, gi)| xi - gi / tau).collect();
    let mut out = vec![0.0; v.len()];
    problem.prox_block(block, &v, 1.0 / tau, &mut out);
    Ok(out)
}
