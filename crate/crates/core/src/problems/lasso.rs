//! LASSO `½‖z − Ax‖² + λ‖x‖₁` with scalar blocks.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::base::problem::CompositeProblem;
use crate::base::prox::shrink;
use crate::error::{bail, Result};
use crate::flexa::surrogate::{SurrogateFamily, SurrogateKind};
use crate::linalg::{axpy, column, dot, gemv, gemv_t, norm1, sym_lambda_max};

#[derive(Debug, Clone)]
pub struct Lasso {
    pub a: DMatrix<f64>,
    pub z: Vec<f64>,
    pub lambda: f64,
    col_norms2: Vec<f64>,
    pub x_star: Option<Vec<f64>>,
    pub v_star: Option<f64>,
}

impl Lasso {
    pub fn new(a: DMatrix<f64>, z: Vec<f64>, lambda: f64) -> Result<Self> {
        if z.len() != a.nrows() {
            bail!(Domain, "z has length {}, A has {} rows", z.len(), a.nrows());
        }
        if !(lambda > 0.0) {
            bail!(Config, "lambda must be positive, got {lambda}");
        }
        let col_norms2 = (0..a.ncols()).map(|j| dot(column(&a, j), column(&a, j))).collect();
        Ok(Self { a, z, lambda, col_norms2, x_star: None, v_star: None })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// `Ax − z`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.rows()];
        gemv(&self.a, x, &mut r);
        r.iter_mut().zip(&self.z).for_each(|(ri, zi)| *ri -= zi);
        r
    }

    /// `tr(AᵀA)/(2m)`, half the mean eigenvalue of `∇²F`.
    pub fn tau_heuristic(&self) -> f64 {
        self.col_norms2.iter().sum::<f64>() / (2.0 * self.cols() as f64)
    }

    pub fn lipschitz(&self) -> f64 {
        sym_lambda_max(&(self.a.transpose() * &self.a))
    }

    /// Closed-form best response `S_λ(aᵢᵀrᵢ + τxᵢ)/(τ + ‖aᵢ‖²)` with `rᵢ = z − Σ_{j≠i} aⱼxⱼ`,
    /// given the full residual `Ax − z`.
    pub fn best_response_scalar(&self, i: usize, x: &[f64], residual: &[f64], tau: f64) -> Result<f64> {
        let n2 = self.col_norms2[i];
        if tau + n2 <= 0.0 {
            bail!(Domain, "block {i} is degenerate: zero column and tau = 0");
        }
        let air = -dot(column(&self.a, i), residual) + n2 * x[i];
        Ok(shrink(air + tau * x[i], self.lambda) / (tau + n2))
    }

    pub fn relative_error(&self, x: &[f64]) -> Option<f64> {
        self.v_star.map(|v| crate::base::merit::relative_error(self.value(x), v))
    }
}

impl CompositeProblem for Lasso {
    fn dim(&self) -> usize {
        self.cols()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        let r = self.residual(x);
        gemv_t(&self.a, &r, out);
    }

    fn eval_g(&self, x: &[f64]) -> f64 {
        self.lambda * norm1(x)
    }

    fn eval_g_block(&self, _block: Range<usize>, xi: &[f64]) -> f64 {
        self.lambda * norm1(xi)
    }

    fn g_is_zero(&self) -> bool {
        false
    }

    fn prox_block(&self, _block: Range<usize>, v: &[f64], t: f64, out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = shrink(*vi, t * self.lambda);
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lipschitz())
    }
}

/// The exact scalar best response, with the residual `Ax − z` as cache.
#[derive(Debug, Clone, Copy, Default)]
pub struct LassoExact;

impl SurrogateFamily<Lasso> for LassoExact {
    type Cache = Vec<f64>;

    fn kind(&self) -> SurrogateKind {
        SurrogateKind::BlockConvex
    }

    fn prepare(&self, p: &Lasso, x: &[f64]) -> Vec<f64> {
        p.residual(x)
    }

    fn update_cache(&self, p: &Lasso, cache: &mut Vec<f64>, x: &[f64], block: Range<usize>, old: &[f64]) {
        for (j, o) in block.zip(old) {
            let d = x[j] - o;
            if d != 0.0 {
                axpy(d, column(&p.a, j), cache);
            }
        }
    }

    fn block_gradient(&self, p: &Lasso, cache: &Vec<f64>, _x: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, j) in out.iter_mut().zip(block) {
            *o = dot(column(&p.a, j), cache);
        }
    }

    fn best_response(&self, p: &Lasso, cache: &Vec<f64>, x: &[f64], block: Range<usize>, tau: f64, out: &mut [f64]) {
        for (o, j) in out.iter_mut().zip(block) {
            // A zero column with tau = 0 has no unique minimizer; staying put is one of them.
            *o = p.best_response_scalar(j, x, cache, tau).unwrap_or(x[j]);
        }
    }

    fn value(&self, p: &Lasso, x: &[f64], block: Range<usize>, tau: f64, z: &[f64]) -> f64 {
        let mut r = p.residual(x);
        let mut prox = 0.0;
        for (j, zj) in block.zip(z) {
            let d = zj - x[j];
            axpy(d, column(&p.a, j), &mut r);
            prox += d * d;
        }
        0.5 * dot(&r, &r) + 0.5 * tau * prox
    }

    fn gradient(&self, p: &Lasso, x: &[f64], block: Range<usize>, tau: f64, z: &[f64], out: &mut [f64]) {
        let mut r = p.residual(x);
        for (j, zj) in block.clone().zip(z) {
            axpy(zj - x[j], column(&p.a, j), &mut r);
        }
        for ((o, j), zj) in out.iter_mut().zip(block).zip(z) {
            *o = dot(column(&p.a, j), &r) + tau * (zj - x[j]);
        }
    }
}

/// A LASSO instance whose optimum is known by construction.
///
/// Columns are unit-norm and built around a random residual `r*` so that `aᵢᵀr* = λ sign(x*ᵢ)`
/// on the support and `|aᵢᵀr*| ≤ 0.9λ` off it; then `z = Ax* + r*` makes `x*` optimal.
pub fn generate_lasso(m: usize, q: usize, sparsity_fraction: f64, seed: u64) -> Result<Lasso> {
    if m == 0 || q < 2 {
        bail!(Config, "need m >= 1 and q >= 2");
    }
    if !(sparsity_fraction > 0.0 && sparsity_fraction <= 1.0) {
        bail!(Config, "sparsity fraction must lie in (0,1], got {sparsity_fraction}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = 1.0;
    let k = ((sparsity_fraction * m as f64).round() as usize).clamp(1, m);
    let support = sample(&mut rng, m, k).into_vec();
    let mut x_star = vec![0.0; m];
    for &i in &support {
        let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x_star[i] = s * rng.gen_range(1.0..2.0);
    }
    let r: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let rn = dot(&r, &r).sqrt();
    if lambda >= rn {
        bail!(Numerical, "certificate residual is too short for lambda");
    }
    let rhat: Vec<f64> = r.iter().map(|v| v / rn).collect();
    let mut a = DMatrix::zeros(q, m);
    for j in 0..m {
        let target = if x_star[j] != 0.0 { lambda * x_star[j].signum() } else { lambda * rng.gen_range(-0.9..0.9) };
        let c = target / rn;
        let mut w: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let proj = dot(&w, &rhat);
        axpy(-proj, &rhat, &mut w);
        let wn = dot(&w, &w).sqrt();
        if wn == 0.0 {
            bail!(Numerical, "degenerate column draw");
        }
        let s = (1.0 - c * c).sqrt() / wn;
        for i in 0..q {
            a[(i, j)] = c * rhat[i] + s * w[i];
        }
    }
    let mut z = vec![0.0; q];
    gemv(&a, &x_star, &mut z);
    z.iter_mut().zip(&r).for_each(|(zi, ri)| *zi += ri);
    let mut inst = Lasso::new(a, z, lambda)?;
    let v = 0.5 * rn * rn + lambda * norm1(&x_star);
    inst.x_star = Some(x_star);
    inst.v_star = Some(v);
    Ok(inst)
}
