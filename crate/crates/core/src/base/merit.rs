//! Merit functions for stopping and reporting.

use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::problem::CompositeProblem;
use crate::linalg::dist2;

/// Per-iteration merit values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeritReport {
    pub objective: f64,
    pub fixed_point_residual: f64,
    pub relative_descent: f64,
    pub iterate_delta: f64,
}

impl MeritReport {
    pub fn is_finite(&self) -> bool {
        self.objective.is_finite()
            && self.fixed_point_residual.is_finite()
            && self.relative_descent.is_finite()
            && self.iterate_delta.is_finite()
    }
}

/// `(V(xᵏ) − V(xᵏ⁺¹)) / max(1, |V(xᵏ)|)`.
pub fn relative_descent(v_prev: f64, v_next: f64) -> f64 {
    (v_prev - v_next) / v_prev.abs().max(1.0)
}

/// `‖xᵏ⁺¹ − xᵏ‖`.
pub fn iterate_delta(x_prev: &[f64], x_next: &[f64]) -> f64 {
    dist2(x_prev, x_next)
}

/// `‖prox_G(x − ∇F(x)) − x‖` with unit proximal weight.
pub fn prox_gradient_residual<P: CompositeProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let m = problem.dim();
    let mut g = vec![0.0; m];
    problem.grad_f(x, &mut g);
    let v: alloc::vec::Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
    let mut p = vec![0.0; m];
    problem.prox_block(0..m, &v, 1.0, &mut p);
    dist2(&p, x)
}

/// `(V(x) − V*) / V*`; the absolute gap when `V* = 0`.
pub fn relative_error(v: f64, v_star: f64) -> f64 {
    if v_star == 0.0 {
        v - v_star
    } else {
        (v - v_star) / v_star.abs()
    }
}
