//! Dictionary learning `min ‖Y − DX‖²_F + λ_s G(X)` over `D ∈ 𝒟` by alternating D and X majorizers.

use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use super::{check_descent, should_stop, ChainRecord, MmConfig, StopReason};
use crate::base::merit::relative_descent;
use crate::base::prox::shrink;
use crate::error::{bail, Result};
use crate::linalg::sym_lambda_max;
use crate::penalties::DcPenalty;

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum DConstraint {
    /// `‖D‖²_F ≤ α`.
    FrobeniusBall(f64),
    /// `‖dᵢ‖² ≤ αᵢ` for every column.
    PerColumnBall(Vec<f64>),
    Nonneg,
}

impl DConstraint {
    fn validate(&self, r: usize) -> Result<()> {
        match self {
            DConstraint::FrobeniusBall(a) if !(*a > 0.0) => bail!(Config, "alpha must be positive, got {a}"),
            DConstraint::PerColumnBall(a) if a.len() != r => {
                bail!(Config, "expected {r} column radii, got {}", a.len())
            }
            DConstraint::PerColumnBall(a) if a.iter().any(|v| !(*v > 0.0)) => {
                bail!(Config, "column radii must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Euclidean projection onto the constraint set.
    pub fn project(&self, d: &mut DMatrix<f64>) {
        match self {
            DConstraint::FrobeniusBall(a) => {
                let n2 = d.norm_squared();
                if n2 > *a {
                    d.scale_mut((a / n2).sqrt());
                }
            }
            DConstraint::PerColumnBall(a) => {
                for (j, aj) in a.iter().enumerate() {
                    let mut c = d.column_mut(j);
                    let n2 = c.norm_squared();
                    if n2 > *aj {
                        c.scale_mut((aj / n2).sqrt());
                    }
                }
            }
            DConstraint::Nonneg => d.iter_mut().for_each(|v| *v = v.max(0.0)),
        }
    }

    pub fn is_feasible(&self, d: &DMatrix<f64>, tol: f64) -> bool {
        match self {
            DConstraint::FrobeniusBall(a) => d.norm_squared() <= a + tol,
            DConstraint::PerColumnBall(a) => a.iter().enumerate().all(|(j, aj)| d.column(j).norm_squared() <= aj + tol),
            DConstraint::Nonneg => d.iter().all(|v| *v >= -tol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DUpdate {
    /// Exact minimization over the Frobenius ball with the multiplier found by bisection.
    Bisection,
    /// One projected gradient step with step `1/λmax(XXᵀ)`.
    ProjectedStep,
}

#[derive(Debug, Clone)]
pub struct DictConfig {
    pub rank: usize,
    pub lambda_s: f64,
    pub penalty: DcPenalty,
    pub constraint: DConstraint,
    pub d_update: DUpdate,
    /// Soft-thresholding steps per X-update.
    pub x_steps: usize,
    pub mm: MmConfig,
}

#[derive(Debug, Clone)]
pub struct DictResult {
    pub d: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub objectives: Vec<f64>,
    pub chain: Vec<ChainRecord>,
    pub stop: StopReason,
}

impl DictResult {
    pub fn max_chain_violation(&self) -> f64 {
        self.chain.iter().map(ChainRecord::violation).fold(0.0, f64::max)
    }
}

pub fn dictionary_objective(y: &DMatrix<f64>, d: &DMatrix<f64>, x: &DMatrix<f64>, lambda_s: f64, g: &DcPenalty) -> f64 {
    (y - d * x).norm_squared() + lambda_s * x.iter().map(|&v| g.value(v)).sum::<f64>()
}

/// `D(μ) = YXᵀ(XXᵀ + μI)⁻¹`, or `None` if the system is singular.
fn d_of_mu(yxt: &DMatrix<f64>, xxt: &DMatrix<f64>, mu: f64) -> Option<DMatrix<f64>> {
    let r = xxt.nrows();
    let m = xxt + DMatrix::identity(r, r) * mu;
    let chol = m.cholesky()?;
    // D(μ)ᵀ = (XXᵀ + μI)⁻¹ XYᵀ since the system matrix is symmetric.
    Some(chol.solve(&yxt.transpose()).transpose())
}

fn projected_step(y: &DMatrix<f64>, x: &DMatrix<f64>, d: &DMatrix<f64>, constraint: &DConstraint) -> DMatrix<f64> {
    let xxt = x * x.transpose();
    let l = sym_lambda_max(&xxt);
    if !(l > 0.0) {
        return d.clone();
    }
    let grad = d * &xxt - y * x.transpose();
    let mut next = d - grad / l;
    constraint.project(&mut next);
    next
}

/// `F(Dᵏ) + ⟨∇F(Dᵏ), D − Dᵏ⟩ + λmax(XXᵀ)‖D − Dᵏ‖²`, the majorizer of the projected step.
fn projected_step_surrogate(y: &DMatrix<f64>, x: &DMatrix<f64>, dk: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let xxt = x * x.transpose();
    let l = sym_lambda_max(&xxt);
    let r = dk * x - y;
    let grad = 2.0 * &r * x.transpose();
    let diff = d - dk;
    r.norm_squared() + grad.dot(&diff) + l * diff.norm_squared()
}

/// Exact minimizer of `‖Y − DX‖²_F` subject to `‖D‖²_F ≤ α`.
pub fn d_update_bisection(y: &DMatrix<f64>, x: &DMatrix<f64>, alpha: f64) -> Option<DMatrix<f64>> {
    let yxt = y * x.transpose();
    let xxt = x * x.transpose();
    let h = |d: &DMatrix<f64>| alpha - d.norm_squared();
    let d0 = d_of_mu(&yxt, &xxt, 0.0)?;
    if h(&d0) >= 0.0 {
        return Some(d0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut d_hi = d_of_mu(&yxt, &xxt, hi)?;
    while h(&d_hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        d_hi = d_of_mu(&yxt, &xxt, hi)?;
    }
    for _ in 0..BISECTION_MAX_ITERS {
        if h(&d_hi) <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d_mid = d_of_mu(&yxt, &xxt, mid)?;
        if h(&d_mid) >= 0.0 {
            hi = mid;
            d_hi = d_mid;
        } else {
            lo = mid;
        }
    }
    Some(d_hi)
}

/// One D-update together with the majorizer value at the new point.
pub fn d_update(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    d: &DMatrix<f64>,
    constraint: &DConstraint,
    method: DUpdate,
) -> Result<(DMatrix<f64>, f64)> {
    if method == DUpdate::Bisection {
        let alpha = match constraint {
            DConstraint::FrobeniusBall(a) => *a,
            _ => bail!(Config, "bisection needs the Frobenius-ball constraint"),
        };
        if let Some(next) = d_update_bisection(y, x, alpha) {
            let v = (y - &next * x).norm_squared();
            return Ok((next, v));
        }
        log::debug!("XXᵀ is singular, falling back to the projected step");
    }
    let next = projected_step(y, x, d, constraint);
    let sur = projected_step_surrogate(y, x, d, &next);
    Ok((next, sur))
}

fn x_step(y: &DMatrix<f64>, d: &DMatrix<f64>, x: &DMatrix<f64>, lambda_s: f64, g: &DcPenalty) -> (DMatrix<f64>, f64) {
    let l = 2.0 * sym_lambda_max(&(d.transpose() * d));
    if !(l > 0.0) {
        // With D = 0 the loss is constant and the penalty alone is minimized at 0.
        let next = DMatrix::zeros(x.nrows(), x.ncols());
        let v = y.norm_squared();
        return (next, v);
    }
    let r = d * x - y;
    let grad = d.transpose() * &r;
    let eta = g.eta();
    let next = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let b = x[(i, j)] - 2.0 / l * grad[(i, j)] + lambda_s / l * g.dg_minus(x[(i, j)]);
        shrink(b, lambda_s * eta / l)
    });
    let diff = &next - x;
    let dc: f64 = next.iter().zip(x.iter()).map(|(a, b)| g.majorize_dc(*a, *b)).sum();
    let sur = r.norm_squared() + 2.0 * grad.dot(&diff) + 0.5 * l * diff.norm_squared() + lambda_s * dc;
    (next, sur)
}

pub fn dictionary_learning_mm(y: &DMatrix<f64>, config: &DictConfig) -> Result<DictResult> {
    config.mm.validate()?;
    let (m, t) = y.shape();
    let r = config.rank;
    if r == 0 || r > m.min(t) {
        bail!(Config, "rank must lie in 1..={}, got {r}", m.min(t));
    }
    if !(config.lambda_s > 0.0) {
        bail!(Config, "lambda_s must be positive");
    }
    if config.x_steps == 0 {
        bail!(Config, "x_steps must be at least 1");
    }
    config.constraint.validate(r)?;
    if y.iter().any(|v| !v.is_finite()) {
        bail!(Numerical, "Y is not finite");
    }
    let g = &config.penalty;
    let ls = config.lambda_s;
    let mut d = y.columns(0, r).into_owned();
    config.constraint.project(&mut d);
    let mut x = DMatrix::zeros(r, t);
    let mut v = dictionary_objective(y, &d, &x, ls, g);
    let mut objectives = alloc::vec![v];
    let mut chain = Vec::new();
    let mut stop = StopReason::MaxIters;
    for _ in 0..config.mm.max_iters {
        let v_start = v;
        let (mut d_new, mut sur) = d_update(y, &x, &d, &config.constraint, config.d_update)?;
        let g_x = ls * x.iter().map(|&e| g.value(e)).sum::<f64>();
        let mut v_mid = dictionary_objective(y, &d_new, &x, ls, g);
        if v_mid > v {
            d_new = d.clone();
            v_mid = v;
            sur = v - g_x;
        }
        check_descent(&config.mm, v, v_mid)?;
        chain.push(ChainRecord { v_prev: v, surrogate_new: sur + g_x, v_new: v_mid });
        let dd = (&d_new - &d).norm_squared();
        d = d_new;
        v = v_mid;

        let mut dx = 0.0;
        for _ in 0..config.x_steps {
            let (x_new, sur) = x_step(y, &d, &x, ls, g);
            let v_new = dictionary_objective(y, &d, &x_new, ls, g);
            check_descent(&config.mm, v, v_new)?;
            chain.push(ChainRecord { v_prev: v, surrogate_new: sur, v_new });
            dx += (&x_new - &x).norm_squared();
            x = x_new;
            v = v_new;
        }
        objectives.push(v);
        if let Some(reason) = should_stop(&config.mm, relative_descent(v_start, v), (dd + dx).sqrt()) {
            stop = reason;
            break;
        }
    }
    Ok(DictResult { d, x, objectives, chain, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, 2.0, 1.0])
    }

    #[test]
    fn bisection_with_identity_x_and_loose_ball_returns_y() {
        let y = y();
        let x = DMatrix::identity(2, 2);
        let d = d_update_bisection(&y, &x, y.norm_squared() + 1.0).unwrap();
        assert!((d - &y).norm() < 1e-12);
    }

    #[test]
    fn bisection_hits_the_ball_boundary() {
        let y = y();
        let x = DMatrix::identity(2, 2);
        let alpha = 0.3 * y.norm_squared();
        let d = d_update_bisection(&y, &x, alpha).unwrap();
        assert!((d.norm_squared() - alpha).abs() <= 1e-8);
        // With X = I the constrained minimizer is the radial projection of Y.
        let mut p = y.clone();
        DConstraint::FrobeniusBall(alpha).project(&mut p);
        assert!((d - p).norm() < 1e-6);
    }

    #[test]
    fn singular_xxt_falls_back_to_projected_step() {
        let y = y();
        let x = DMatrix::zeros(2, 2);
        let d0 = DMatrix::from_element(3, 2, 0.1);
        let (d, _) = d_update(&y, &x, &d0, &DConstraint::FrobeniusBall(1.0), DUpdate::Bisection).unwrap();
        assert_eq!(d, d0);
    }

    #[test]
    fn projections_are_feasible() {
        let mut d = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 4.0, 2.0]);
        let c = DConstraint::PerColumnBall(alloc::vec![1.0, 2.0]);
        c.project(&mut d);
        assert!(c.is_feasible(&d, 1e-12));
        assert!((d.column(0).norm_squared() - 1.0).abs() < 1e-12);
        let mut d = DMatrix::from_row_slice(1, 2, &[-1.0, 2.0]);
        DConstraint::Nonneg.project(&mut d);
        assert_eq!(d[(0, 0)], 0.0);
    }

    #[test]
    fn learning_descends_and_stays_feasible() {
        let y = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        for (constraint, method) in [
            (DConstraint::FrobeniusBall(4.0), DUpdate::Bisection),
            (DConstraint::FrobeniusBall(4.0), DUpdate::ProjectedStep),
            (DConstraint::PerColumnBall(alloc::vec![1.0, 1.0]), DUpdate::ProjectedStep),
            (DConstraint::Nonneg, DUpdate::ProjectedStep),
        ] {
            let cfg = DictConfig {
                rank: 2,
                lambda_s: 0.5,
                penalty: DcPenalty::exp(2.0).unwrap(),
                constraint: constraint.clone(),
                d_update: method,
                x_steps: 1,
                mm: MmConfig { max_iters: 200, ..MmConfig::default() },
            };
            let r = dictionary_learning_mm(&y, &cfg).unwrap();
            assert!(r.max_chain_violation() <= 1e-10, "{constraint:?}");
            assert!(constraint.is_feasible(&r.d, 1e-10));
            assert!(r.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0)));
        }
    }
}
