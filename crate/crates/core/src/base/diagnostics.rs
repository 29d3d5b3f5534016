//! Finite-difference checks used by tests and by the acceptance battery.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::problem::CompositeProblem;
use crate::linalg::{dist2, norm2};

/// Central-difference gradient with per-coordinate step `h·max(1, |xᵢ|)`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i] - step;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Central difference of a scalar function.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let step = h * x.abs().max(1.0);
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// `‖a − b‖ / max(1, ‖b‖)`.
pub fn relative_gap(analytic: &[f64], reference: &[f64]) -> f64 {
    dist2(analytic, reference) / norm2(reference).max(1.0)
}

/// Relative error between `∇F` and its central-difference estimate at `x`.
pub fn gradient_check<P: CompositeProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let mut g = vec![0.0; problem.dim()];
    problem.grad_f(x, &mut g);
    let fd = fd_gradient(|v| problem.eval_f(v), x, 1e-6);
    relative_gap(&g, &fd)
}
