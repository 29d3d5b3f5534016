//! Majorization-minimization: the generic loop, Block-MM, and the MM solvers for
//! sparse least squares, NNLS, matrix completion and dictionary learning.

pub mod block;
pub mod dictionary;
pub mod matcomp;
pub mod nnls;
pub mod sparse_ls;

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::base::merit::{iterate_delta, relative_descent, MeritReport};
use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::all_finite;

pub use block::{block_mm_minimize, BlockMmProblem, BlockRule};
pub use dictionary::{dictionary_learning_mm, DConstraint, DUpdate, DictConfig, DictResult};
pub use matcomp::{matcomp_block_mm, singular_value_threshold, MatCompResult, MatCompState};
pub use nnls::{nnls_mm, NnlsVariant};
pub use sparse_ls::{sparse_ls_mm, SparseLsVariant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmConfig {
    pub max_iters: usize,
    /// Stop when the relative descent drops below this value.
    pub tol_relative_descent: f64,
    /// Stop when `‖xᵏ⁺¹ − xᵏ‖` drops below this value.
    pub tol_iterate_delta: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    /// Allowed objective increase, scaled by `max(1, |V|)`.
    pub descent_tol: f64,
    pub record_iterates: bool,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol_relative_descent: 1e-10,
            tol_iterate_delta: 1e-8,
            inner_max_iters: 200,
            inner_tol: 1e-8,
            descent_tol: 1e-10,
            record_iterates: true,
        }
    }
}

impl MmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.inner_max_iters == 0 {
            bail!(Config, "iteration budgets must be at least 1");
        }
        for (name, v) in [
            ("tol_relative_descent", self.tol_relative_descent),
            ("tol_iterate_delta", self.tol_iterate_delta),
            ("inner_tol", self.inner_tol),
            ("descent_tol", self.descent_tol),
        ] {
            if !(v > 0.0) {
                bail!(Config, "{name} must be positive, got {v}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RelativeDescent,
    IterateDelta,
    MaxIters,
}

/// `V(xᵏ⁺¹) ≤ Ṽ(xᵏ⁺¹|xᵏ) ≤ Ṽ(xᵏ|xᵏ) = V(xᵏ)` for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRecord {
    pub v_prev: f64,
    pub surrogate_new: f64,
    pub v_new: f64,
}

impl ChainRecord {
    /// Largest violation of the two inequalities, relative to `max(1, |V(xᵏ)|)`.
    pub fn violation(&self) -> f64 {
        let scale = self.v_prev.abs().max(1.0);
        let a = (self.v_new - self.surrogate_new) / scale;
        let b = (self.surrogate_new - self.v_prev) / scale;
        a.max(b).max(0.0)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.violation() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct MmTrace {
    pub x: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub reports: Vec<MeritReport>,
    pub chain: Vec<ChainRecord>,
    pub stop: StopReason,
}

impl MmTrace {
    pub fn iterations(&self) -> usize {
        self.reports.len()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.objective).collect()
    }

    pub fn max_chain_violation(&self) -> f64 {
        self.chain.iter().map(ChainRecord::violation).fold(0.0, f64::max)
    }
}

/// An objective together with a majorizer that can be minimized exactly.
pub trait MmProblem {
    fn objective(&self, x: &[f64]) -> f64;

    /// `Ṽ(x | base)` if it can be evaluated.
    fn surrogate_value(&self, _x: &[f64], _base: &[f64]) -> Option<f64> {
        None
    }

    /// A global minimizer of `Ṽ(· | base)`.
    fn minimize_surrogate(&self, base: &[f64]) -> Result<Vec<f64>>;
}

/// Decide whether to stop after an accepted step.
pub(crate) fn should_stop(cfg: &MmConfig, rd: f64, delta: f64) -> Option<StopReason> {
    if rd.abs() <= cfg.tol_relative_descent {
        Some(StopReason::RelativeDescent)
    } else if delta <= cfg.tol_iterate_delta {
        Some(StopReason::IterateDelta)
    } else {
        None
    }
}

pub(crate) fn check_descent(cfg: &MmConfig, v_prev: f64, v_new: f64) -> Result<()> {
    if !v_new.is_finite() {
        bail!(Numerical, "objective became non-finite");
    }
    if v_new > v_prev + cfg.descent_tol * v_prev.abs().max(1.0) {
        bail!(Contract, "objective increased from {v_prev:e} to {v_new:e}");
    }
    Ok(())
}

/// Run `xᵏ⁺¹ = argmin Ṽ(·|xᵏ)` until a merit crosses its tolerance.
pub fn mm_minimize<P: MmProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &MmConfig,
) -> Result<MmTrace> {
    config.validate()?;
    let mut x = x0.to_vec();
    let mut v = problem.objective(&x);
    let mut trace = MmTrace {
        x: Vec::new(),
        iterates: Vec::new(),
        reports: Vec::new(),
        chain: Vec::new(),
        stop: StopReason::MaxIters,
    };
    if config.record_iterates {
        trace.iterates.push(x.clone());
    }
    for _ in 0..config.max_iters {
        let next = problem.minimize_surrogate(&x)?;
        if !all_finite(&next) {
            bail!(Numerical, "surrogate minimizer is not finite");
        }
        let v_next = problem.objective(&next);
        check_descent(config, v, v_next)?;
        let sur = problem.surrogate_value(&next, &x).unwrap_or(v_next);
        trace.chain.push(ChainRecord { v_prev: v, surrogate_new: sur, v_new: v_next });
        let rd = relative_descent(v, v_next);
        let delta = iterate_delta(&x, &next);
        trace.reports.push(MeritReport {
            objective: v_next,
            fixed_point_residual: delta,
            relative_descent: rd,
            iterate_delta: delta,
        });
        x = next;
        v = v_next;
        if config.record_iterates {
            trace.iterates.push(x.clone());
        }
        if let Some(reason) = should_stop(config, rd, delta) {
            trace.stop = reason;
            break;
        }
    }
    trace.x = x;
    Ok(trace)
}

/// Proximal-gradient MM on a composite problem with a known Lipschitz constant:
/// `Ṽ(x|y) = F(y) + ∇F(y)ᵀ(x−y) + (L/2)‖x−y‖² + G(x)`.
pub struct ProxGradientMm<'a, P: CompositeProblem + ?Sized> {
    pub problem: &'a P,
    pub lipschitz: f64,
}

impl<'a, P: CompositeProblem + ?Sized> ProxGradientMm<'a, P> {
    pub fn new(problem: &'a P, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) {
            bail!(Config, "Lipschitz constant must be positive");
        }
        Ok(Self { problem, lipschitz })
    }
}

impl<P: CompositeProblem + ?Sized> MmProblem for ProxGradientMm<'_, P> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.problem.value(x)
    }

    fn surrogate_value(&self, x: &[f64], base: &[f64]) -> Option<f64> {
        let mut g = alloc::vec![0.0; base.len()];
        self.problem.grad_f(base, &mut g);
        let lin: f64 = g.iter().zip(x.iter().zip(base)).map(|(gi, (a, b))| gi * (a - b)).sum();
        let quad: f64 = x.iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum();
        Some(self.problem.eval_f(base) + lin + 0.5 * self.lipschitz * quad + self.problem.eval_g(x))
    }

    fn minimize_surrogate(&self, base: &[f64]) -> Result<Vec<f64>> {
        let m = base.len();
        let mut g = alloc::vec![0.0; m];
        self.problem.grad_f(base, &mut g);
        let v: Vec<f64> = base.iter().zip(&g).map(|(x, gi)| x - gi / self.lipschitz).collect();
        let mut out = alloc::vec![0.0; m];
        self.problem.prox_block(0..m, &v, 1.0 / self.lipschitz, &mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    struct Square;
    impl MmProblem for Square {
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn surrogate_value(&self, x: &[f64], _b: &[f64]) -> Option<f64> {
            Some(x[0] * x[0])
        }
        fn minimize_surrogate(&self, _b: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    /// `|x|^p` majorized by `(p/2)|y|^{p−2}x² + (1 − p/2)|y|^p`.
    struct RootAbs {
        p: f64,
    }
    impl MmProblem for RootAbs {
        fn objective(&self, x: &[f64]) -> f64 {
            x[0].abs().powf(self.p)
        }
        fn surrogate_value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
            let ay = y[0].abs();
            Some(0.5 * self.p * ay.powf(self.p - 2.0) * x[0] * x[0] + (1.0 - 0.5 * self.p) * ay.powf(self.p))
        }
        fn minimize_surrogate(&self, _y: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    #[test]
    fn exact_surrogate_converges_in_one_step() {
        let t = mm_minimize(&Square, &[3.0], &MmConfig::default()).unwrap();
        assert_eq!(t.x, vec![0.0]);
        assert_eq!(t.iterates[1], vec![0.0]);
    }

    #[test]
    fn contract_violation_is_reported() {
        struct Bad;
        impl MmProblem for Bad {
            fn objective(&self, x: &[f64]) -> f64 {
                x[0]
            }
            fn minimize_surrogate(&self, b: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![b[0] + 1.0])
            }
        }
        let e = mm_minimize(&Bad, &[0.0], &MmConfig::default());
        assert!(matches!(e, Err(crate::error::Error::Contract(_))));
    }

    /// Weighted quadratic with an offset so the surrogate minimizer is nontrivial:
    /// `V(x) = |x|^{1/2} + (x − 1)²/8`.
    struct RootAbsShifted;
    impl RootAbsShifted {
        fn weight(y: f64) -> f64 {
            0.25 * y.abs().powf(-1.5)
        }
    }
    impl MmProblem for RootAbsShifted {
        fn objective(&self, x: &[f64]) -> f64 {
            x[0].abs().sqrt() + (x[0] - 1.0).powi(2) / 8.0
        }
        fn surrogate_value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
            let ay = y[0].abs();
            Some(Self::weight(y[0]) * x[0] * x[0] + 0.75 * ay.sqrt() + (x[0] - 1.0).powi(2) / 8.0)
        }
        fn minimize_surrogate(&self, y: &[f64]) -> Result<Vec<f64>> {
            // d/dx [w x² + (x−1)²/8] = 0.
            let w = Self::weight(y[0]);
            Ok(vec![0.25 / (2.0 * w + 0.25)])
        }
    }

    #[test]
    fn quadratic_majorizer_of_root_gives_monotone_sequence() {
        let cfg = MmConfig { max_iters: 30, ..MmConfig::default() };
        let t = mm_minimize(&RootAbs { p: 0.5 }, &[1.0], &cfg).unwrap();
        assert_eq!(t.x, vec![0.0]);

        let t = mm_minimize(&RootAbsShifted, &[1.0], &cfg).unwrap();
        let xs: Vec<f64> = t.iterates.iter().map(|v| v[0]).collect();
        assert!(xs.windows(2).all(|w| w[1] <= w[0] && w[1] >= 0.0));
        assert!(t.max_chain_violation() <= 1e-12);
        // Each step is the grid minimizer of its surrogate.
        for w in t.iterates.windows(2) {
            let y = w[0][0];
            let grid_min = (0..=20_000)
                .map(|k| -1.0 + 2.0 * k as f64 / 20_000.0)
                .min_by(|a, b| {
                    let fa = RootAbsShifted.surrogate_value(&[*a], &[y]).unwrap();
                    let fb = RootAbsShifted.surrogate_value(&[*b], &[y]).unwrap();
                    fa.partial_cmp(&fb).unwrap()
                })
                .unwrap();
            assert!((grid_min - w[1][0]).abs() <= 1e-4);
        }
    }

    #[test]
    fn config_validation() {
        assert!(MmConfig { inner_tol: 0.0, ..MmConfig::default() }.validate().is_err());
        assert!(MmConfig { max_iters: 0, ..MmConfig::default() }.validate().is_err());
    }
}
