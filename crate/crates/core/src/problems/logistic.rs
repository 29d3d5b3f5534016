//! Sparse logistic regression `Σⱼ log(1 + exp(−wⱼ zⱼᵀx)) + λ‖x‖₁`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::base::problem::CompositeProblem;
use crate::base::prox::shrink;
use crate::error::{bail, Result};
use crate::flexa::surrogate::{SurrogateFamily, SurrogateKind};
use crate::linalg::{column, norm1, norm_inf};

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e⁻ˣ)` without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct Logistic {
    /// `q × m`, one sample per row.
    pub z: DMatrix<f64>,
    pub w: Vec<f64>,
    pub lambda: f64,
    /// Divide the loss by `q`.
    pub normalize: bool,
}

impl Logistic {
    pub fn new(z: DMatrix<f64>, w: Vec<f64>, lambda: f64, normalize: bool) -> Result<Self> {
        if w.len() != z.nrows() {
            bail!(Domain, "{} labels for {} samples", w.len(), z.nrows());
        }
        if w.iter().any(|v| *v != 1.0 && *v != -1.0) {
            bail!(Domain, "labels must be +1 or -1");
        }
        if !(lambda >= 0.0) {
            bail!(Config, "lambda must be nonnegative");
        }
        if z.iter().any(|v| !v.is_finite()) {
            bail!(Numerical, "features must be finite");
        }
        Ok(Self { z, w, lambda, normalize })
    }

    fn scale(&self) -> f64 {
        if self.normalize {
            1.0 / self.z.nrows() as f64
        } else {
            1.0
        }
    }

    /// `tⱼ = wⱼ zⱼᵀx`.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.z.nrows()];
        for (j, xj) in x.iter().enumerate() {
            if *xj != 0.0 {
                for (ti, zi) in t.iter_mut().zip(column(&self.z, j)) {
                    *ti += xj * zi;
                }
            }
        }
        t.iter_mut().zip(&self.w).for_each(|(ti, wi)| *ti *= wi);
        t
    }

    fn loss_from_margins(&self, t: &[f64]) -> f64 {
        self.scale() * t.iter().map(|&v| softplus(-v)).sum::<f64>()
    }

    /// `∂F/∂xᵢ` from the margins.
    pub fn partial(&self, i: usize, t: &[f64]) -> f64 {
        let c = column(&self.z, i);
        self.scale() * (0..t.len()).map(|j| -self.w[j] * c[j] * sigmoid(-t[j])).sum::<f64>()
    }

    /// `∂²F/∂xᵢ²` from the margins.
    pub fn curvature(&self, i: usize, t: &[f64]) -> f64 {
        let c = column(&self.z, i);
        self.scale()
            * (0..t.len())
                .map(|j| {
                    let s = sigmoid(t[j]);
                    c[j] * c[j] * s * (1.0 - s)
                })
                .sum::<f64>()
    }

    /// `x̂ᵢ = S_{λt}(xᵢ − t ∂ᵢF)` with `t = (τ + ∂ᵢᵢF)⁻¹`.
    pub fn best_response_scalar(&self, i: usize, x: &[f64], margins: &[f64], tau: f64) -> Result<f64> {
        let h = self.curvature(i, margins);
        if !(tau + h > 0.0) {
            bail!(Domain, "block {i} has no curvature and tau = 0");
        }
        let t = 1.0 / (tau + h);
        let g = self.partial(i, margins);
        let v = x[i] - t * g;
        if !v.is_finite() {
            bail!(Numerical, "non-finite best response at block {i}");
        }
        Ok(shrink(v, self.lambda * t))
    }

    /// `tr(ZᵀZ)/(2m)`.
    pub fn tau_heuristic(&self) -> f64 {
        self.z.norm_squared() / (2.0 * self.z.ncols() as f64)
    }

    /// `‖∇F(x) − Π_{[−λ,λ]}(∇F(x) − x)‖_∞`.
    pub fn merit(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.grad_f(x, &mut g);
        let m: Vec<f64> = g
            .iter()
            .zip(x)
            .map(|(gi, xi)| gi - (gi - xi).clamp(-self.lambda, self.lambda))
            .collect();
        norm_inf(&m)
    }
}

impl CompositeProblem for Logistic {
    fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        self.loss_from_margins(&self.margins(x))
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        let t = self.margins(x);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.partial(i, &t);
        }
    }

    fn eval_g(&self, x: &[f64]) -> f64 {
        self.lambda * norm1(x)
    }

    fn eval_g_block(&self, _block: Range<usize>, xi: &[f64]) -> f64 {
        self.lambda * norm1(xi)
    }

    fn g_is_zero(&self) -> bool {
        self.lambda == 0.0
    }

    fn prox_block(&self, _block: Range<usize>, v: &[f64], t: f64, out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = shrink(*vi, t * self.lambda);
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        let zz = self.z.transpose() * &self.z;
        Some(0.25 * self.scale() * crate::linalg::sym_lambda_max(&zz))
    }
}

/// Second-order scalar surrogate; the cache holds the margins `wⱼzⱼᵀx`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticNewton;

impl SurrogateFamily<Logistic> for LogisticNewton {
    type Cache = Vec<f64>;

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Custom
    }

    fn prepare(&self, p: &Logistic, x: &[f64]) -> Vec<f64> {
        p.margins(x)
    }

    fn update_cache(&self, p: &Logistic, cache: &mut Vec<f64>, x: &[f64], block: Range<usize>, old: &[f64]) {
        for (i, o) in block.zip(old) {
            let d = x[i] - o;
            if d != 0.0 {
                for ((t, zi), wi) in cache.iter_mut().zip(column(&p.z, i)).zip(&p.w) {
                    *t += d * zi * wi;
                }
            }
        }
    }

    fn block_gradient(&self, p: &Logistic, cache: &Vec<f64>, _x: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            *o = p.partial(i, cache);
        }
    }

    fn best_response(&self, p: &Logistic, cache: &Vec<f64>, x: &[f64], block: Range<usize>, tau: f64, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            *o = p.best_response_scalar(i, x, cache, tau).unwrap_or(x[i]);
        }
    }

    fn value(&self, p: &Logistic, x: &[f64], block: Range<usize>, tau: f64, z: &[f64]) -> f64 {
        let t = p.margins(x);
        let mut v = p.loss_from_margins(&t);
        for (i, zi) in block.zip(z) {
            let d = zi - x[i];
            v += p.partial(i, &t) * d + 0.5 * (p.curvature(i, &t) + tau) * d * d;
        }
        v
    }

    fn gradient(&self, p: &Logistic, x: &[f64], block: Range<usize>, tau: f64, z: &[f64], out: &mut [f64]) {
        let t = p.margins(x);
        for ((o, i), zi) in out.iter_mut().zip(block).zip(z) {
            *o = p.partial(i, &t) + (p.curvature(i, &t) + tau) * (zi - x[i]);
        }
    }
}

/// Standardized Gaussian features with labels from a sparse ground-truth model.
pub fn generate_logistic(q: usize, m: usize, lambda: f64, seed: u64) -> Result<Logistic> {
    if q == 0 || m == 0 {
        bail!(Config, "need at least one sample and one feature");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(q, m, |_, _| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt());
    let truth: Vec<f64> = (0..m).map(|i| if i % 5 == 0 { rng.gen_range(-3.0..3.0) } else { 0.0 }).collect();
    let w = (0..q)
        .map(|j| {
            let s: f64 = (0..m).map(|i| z[(j, i)] * truth[i]).sum();
            if rng.gen::<f64>() < sigmoid(4.0 * s) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Logistic::new(z, w, lambda, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_helpers() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn single_sample_example() {
        let p = Logistic::new(DMatrix::from_element(1, 1, 1.0), vec![1.0], 0.0, false).unwrap();
        let x = [0.0];
        let t = p.margins(&x);
        assert!((p.partial(0, &t) + 0.5).abs() < 1e-15);
        assert!((p.curvature(0, &t) - 0.25).abs() < 1e-15);
        assert!((p.best_response_scalar(0, &x, &t, 1.0).unwrap() - 0.4).abs() < 1e-15);
        let big = Logistic::new(DMatrix::from_element(1, 1, 1.0), vec![1.0], 10.0, false).unwrap();
        assert_eq!(big.best_response_scalar(0, &x, &t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_balanced_data_has_zero_response() {
        // Feature 1 is orthogonal to the labels, so its partial derivative at 0 vanishes.
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let p = Logistic::new(z, vec![1.0, 1.0, -1.0, -1.0], 0.1, false).unwrap();
        let x = [0.0, 0.0];
        let t = p.margins(&x);
        assert!(p.partial(1, &t).abs() < 1e-15);
        assert_eq!(p.best_response_scalar(1, &x, &t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(Logistic::new(DMatrix::from_element(1, 1, 1.0), vec![0.0], 0.0, false).is_err());
    }
}
