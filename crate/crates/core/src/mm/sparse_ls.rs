//! Nonconvex sparse least squares `‖Ax − z‖² + λ Σ g(xᵢ)` with a DC penalty.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::{mm_minimize, MmConfig, MmProblem, MmTrace};
use crate::base::merit::iterate_delta;
use crate::base::prox::shrink;
use crate::error::{bail, Result};
use crate::linalg::{all_finite, dot, gemv, gemv_t, sym_lambda_max};
use crate::penalties::DcPenalty;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseLsVariant {
    /// Outer DC majorization, inner soft-thresholding loop run to `inner_tol`.
    DoubleLoop,
    /// A single soft-thresholding step per outer iteration.
    OneStep,
}

/// Problem data and the constant `L = 2λmax(AᵀA)`.
pub struct SparseLs<'a> {
    pub a: &'a DMatrix<f64>,
    pub z: &'a [f64],
    pub lambda: f64,
    pub penalty: DcPenalty,
    pub lipschitz: f64,
    pub variant: SparseLsVariant,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
}

impl<'a> SparseLs<'a> {
    pub fn new(
        a: &'a DMatrix<f64>,
        z: &'a [f64],
        lambda: f64,
        penalty: DcPenalty,
        variant: SparseLsVariant,
        config: &MmConfig,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            bail!(Config, "lambda must be positive, got {lambda}");
        }
        if z.len() != a.nrows() {
            bail!(Domain, "z has length {}, A has {} rows", z.len(), a.nrows());
        }
        // The exact eigenvalue keeps the quadratic term a true upper bound.
        let lipschitz = 2.0 * sym_lambda_max(&(a.transpose() * a));
        Ok(Self {
            a,
            z,
            lambda,
            penalty,
            lipschitz,
            variant,
            inner_max_iters: config.inner_max_iters,
            inner_tol: config.inner_tol,
        })
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.a.nrows()];
        gemv(self.a, x, &mut r);
        r.iter_mut().zip(self.z).for_each(|(ri, zi)| *ri -= zi);
        r
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        dot(&r, &r)
    }

    fn dc_term(&self, x: &[f64], base: &[f64]) -> f64 {
        x.iter().zip(base).map(|(xi, yi)| self.penalty.majorize_dc(*xi, *yi)).sum()
    }

    /// `x^{k,r+1} = S_{λη/L}(b^{k,r})` with the DC weights taken at `anchor`.
    pub fn inner_step(&self, x: &[f64], anchor: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x);
        let mut g = vec![0.0; x.len()];
        gemv_t(self.a, &r, &mut g);
        let l = self.lipschitz;
        let thr = self.lambda * self.penalty.eta() / l;
        let b: Vec<f64> = (0..x.len())
            .map(|i| x[i] - 2.0 / l * g[i] + self.lambda / l * self.penalty.dg_minus(anchor[i]))
            .collect();
        if !all_finite(&b) {
            bail!(Numerical, "non-finite soft-threshold argument");
        }
        Ok(b.iter().map(|&bi| shrink(bi, thr)).collect())
    }
}

impl MmProblem for SparseLs<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.loss(x) + self.lambda * x.iter().map(|&v| self.penalty.value(v)).sum::<f64>()
    }

    fn surrogate_value(&self, x: &[f64], base: &[f64]) -> Option<f64> {
        let g = self.lambda * self.dc_term(x, base);
        Some(match self.variant {
            SparseLsVariant::DoubleLoop => self.loss(x) + g,
            SparseLsVariant::OneStep => {
                let r = self.residual(base);
                let mut grad = vec![0.0; x.len()];
                gemv_t(self.a, &r, &mut grad);
                let lin: f64 = (0..x.len()).map(|i| 2.0 * grad[i] * (x[i] - base[i])).sum();
                let d = iterate_delta(x, base);
                dot(&r, &r) + lin + 0.5 * self.lipschitz * d * d + g
            }
        })
    }

    fn minimize_surrogate(&self, base: &[f64]) -> Result<Vec<f64>> {
        match self.variant {
            SparseLsVariant::OneStep => self.inner_step(base, base),
            SparseLsVariant::DoubleLoop => {
                let mut x = base.to_vec();
                for _ in 0..self.inner_max_iters {
                    let next = self.inner_step(&x, base)?;
                    let d = iterate_delta(&x, &next);
                    x = next;
                    if d <= self.inner_tol {
                        break;
                    }
                }
                Ok(x)
            }
        }
    }
}

pub fn sparse_ls_mm(
    a: &DMatrix<f64>,
    z: &[f64],
    lambda: f64,
    penalty: DcPenalty,
    variant: SparseLsVariant,
    x0: &[f64],
    config: &MmConfig,
) -> Result<MmTrace> {
    if x0.len() != a.ncols() {
        bail!(Domain, "x0 has length {}, A has {} columns", x0.len(), a.ncols());
    }
    let p = SparseLs::new(a, z, lambda, penalty, variant, config)?;
    mm_minimize(&p, x0, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn large_lambda_zeroes_in_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        let z = [0.3, -0.2];
        let pen = DcPenalty::log(9.0).unwrap();
        let t = sparse_ls_mm(&a, &z, 100.0, pen, SparseLsVariant::OneStep, &[0.0, 0.0], &MmConfig::default())
            .unwrap();
        assert_eq!(t.iterates[1], vec![0.0, 0.0]);
    }

    #[test]
    fn identity_example_first_iterate() {
        let a = DMatrix::<f64>::identity(2, 2);
        let z = [3.0, 0.1];
        let pen = DcPenalty::log(9.0).unwrap();
        let cfg = MmConfig { max_iters: 1, ..MmConfig::default() };
        let t = sparse_ls_mm(&a, &z, 1.0, pen, SparseLsVariant::OneStep, &[0.0, 0.0], &cfg).unwrap();
        // L = 2, b⁰ = z, threshold η/2.
        let thr = 9.0 / 10f64.ln() / 2.0;
        let expected = [3.0 - thr, 0.0];
        assert!((t.x[0] - expected[0]).abs() < 1e-14);
        assert_eq!(t.x[1], expected[1]);
    }

    #[test]
    fn variants_agree_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(15, 10, |_, _| rng.gen_range(-1.0..1.0));
        let z: Vec<f64> = (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pen = DcPenalty::exp(2.0).unwrap();
        let cfg = MmConfig {
            max_iters: 20_000,
            tol_relative_descent: 1e-15,
            tol_iterate_delta: 1e-11,
            inner_tol: 1e-12,
            inner_max_iters: 5000,
            ..MmConfig::default()
        };
        let x0 = vec![0.0; 10];
        let d = sparse_ls_mm(&a, &z, 0.5, pen, SparseLsVariant::DoubleLoop, &x0, &cfg).unwrap();
        let o = sparse_ls_mm(&a, &z, 0.5, pen, SparseLsVariant::OneStep, &x0, &cfg).unwrap();
        let vd = d.reports.last().unwrap().objective;
        let vo = o.reports.last().unwrap().objective;
        assert!((vd - vo).abs() <= 1e-6, "{vd} vs {vo}");
        assert!(d.max_chain_violation() <= 1e-10);
        assert!(o.max_chain_violation() <= 1e-10);
    }
}
