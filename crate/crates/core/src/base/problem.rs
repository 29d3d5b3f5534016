//! The composite problem `min F(x) + G(x)` over `X = X₁ × … × Xₙ`.

use alloc::vec;
use core::ops::Range;

/// Smooth `F` plus convex `G` over a product set.
///
/// Block operations receive the coordinate range of the block inside the full vector.
pub trait CompositeProblem: Sync {
    fn dim(&self) -> usize;

    fn eval_f(&self, x: &[f64]) -> f64;

    fn grad_f(&self, x: &[f64], out: &mut [f64]);

    fn block_grad_f(&self, x: &[f64], block: Range<usize>, out: &mut [f64]) {
        let mut g = vec![0.0; self.dim()];
        self.grad_f(x, &mut g);
        out.copy_from_slice(&g[block]);
    }

    fn eval_g(&self, _x: &[f64]) -> f64 {
        0.0
    }

    /// `gᵢ(xᵢ)` for separable `G`.
    fn eval_g_block(&self, _block: Range<usize>, _xi: &[f64]) -> f64 {
        0.0
    }

    /// Whether `G` vanishes identically.
    fn g_is_zero(&self) -> bool {
        true
    }

    fn g_separable(&self) -> bool {
        true
    }

    /// Minimizer over `Xᵢ` of `½‖u − v‖² + t·gᵢ(u)`.
    fn prox_block(&self, block: Range<usize>, v: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        self.project_block(block, out);
    }

    /// Euclidean projection onto `Xᵢ`, in place.
    fn project_block(&self, _block: Range<usize>, _v: &mut [f64]) {}

    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval_f(x) + self.eval_g(x)
    }

    /// Full-vector projection onto `X`.
    fn project(&self, v: &mut [f64]) {
        let m = self.dim();
        self.project_block(0..m, v);
    }
}

/// Default tolerances, overridable per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub gradient_check: f64,
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feasibility: 1e-12, gradient_check: 1e-5, convergence: 1e-6 }
    }
}
