//! Robust regression with the Huber loss, split across agents.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::{dot, gemv, gemv_t, sym_lambda_max};

/// `H(r) = r²` for `|r| ≤ α`, else `α(2|r| − α)`.
pub fn huber(r: f64, alpha: f64) -> f64 {
    if r.abs() <= alpha {
        r * r
    } else {
        alpha * (2.0 * r.abs() - alpha)
    }
}

pub fn huber_prime(r: f64, alpha: f64) -> f64 {
    2.0 * r.clamp(-alpha, alpha)
}

/// Weight of the quadratic surrogate: `min{1, α/|r|}`, and 1 at `r = 0`.
pub fn huber_weight(r: f64, alpha: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        (alpha / r.abs()).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HuberSurrogate {
    /// Linearization plus `(τ/2)‖x − xᵏ‖²`.
    Linear,
    /// Reweighted least squares plus `(τ/2)‖x − xᵏ‖²`.
    Quadratic,
}

/// One agent's rows `bᵢⱼᵀ` and responses `dᵢⱼ`.
#[derive(Debug, Clone)]
pub struct HuberAgent {
    pub b: DMatrix<f64>,
    pub d: Vec<f64>,
}

impl HuberAgent {
    pub fn new(b: DMatrix<f64>, d: Vec<f64>) -> Result<Self> {
        if b.nrows() != d.len() {
            bail!(Domain, "{} rows but {} responses", b.nrows(), d.len());
        }
        Ok(Self { b, d })
    }

    pub fn dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.d.len()];
        gemv(&self.b, x, &mut r);
        r.iter_mut().zip(&self.d).for_each(|(ri, di)| *ri -= di);
        r
    }

    pub fn value(&self, x: &[f64], alpha: f64) -> f64 {
        self.residual(x).iter().map(|&r| huber(r, alpha)).sum()
    }

    pub fn gradient(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        let hp: Vec<f64> = self.residual(x).iter().map(|&r| huber_prime(r, alpha)).collect();
        gemv_t(&self.b, &hp, out);
    }

    /// `f̃ᵢ(x|xᵏ)` for the chosen surrogate.
    pub fn surrogate_value(&self, x: &[f64], xk: &[f64], alpha: f64, variant: HuberSurrogate, tau: f64) -> f64 {
        let prox: f64 = x.iter().zip(xk).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5 * tau;
        match variant {
            HuberSurrogate::Linear => {
                let mut g = vec![0.0; xk.len()];
                self.gradient(xk, alpha, &mut g);
                let d: Vec<f64> = x.iter().zip(xk).map(|(a, b)| a - b).collect();
                self.value(xk, alpha) + dot(&g, &d) + prox
            }
            HuberSurrogate::Quadratic => {
                let rk = self.residual(xk);
                let r = self.residual(x);
                r.iter().zip(&rk).map(|(ri, rki)| huber_weight(*rki, alpha) * ri * ri).sum::<f64>() + prox
            }
        }
    }

    pub fn surrogate_gradient(&self, x: &[f64], xk: &[f64], alpha: f64, variant: HuberSurrogate, tau: f64, out: &mut [f64]) {
        match variant {
            HuberSurrogate::Linear => self.gradient(xk, alpha, out),
            HuberSurrogate::Quadratic => {
                let rk = self.residual(xk);
                let wr: Vec<f64> = self
                    .residual(x)
                    .iter()
                    .zip(&rk)
                    .map(|(ri, rki)| 2.0 * huber_weight(*rki, alpha) * ri)
                    .collect();
                gemv_t(&self.b, &wr, out);
            }
        }
        for ((o, a), b) in out.iter_mut().zip(x).zip(xk) {
            *o += tau * (a - b);
        }
    }

    /// Minimizer of `f̃ᵢ(·|xᵏ) + aggᵀ(· − xᵏ)` over `ℝᵐ`.
    pub fn surrogate_solve(&self, xk: &[f64], agg: &[f64], alpha: f64, variant: HuberSurrogate, tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            bail!(Config, "tau must be positive");
        }
        let m = self.dim();
        match variant {
            HuberSurrogate::Linear => {
                let mut g = vec![0.0; m];
                self.gradient(xk, alpha, &mut g);
                Ok((0..m).map(|i| xk[i] - (g[i] + agg[i]) / tau).collect())
            }
            HuberSurrogate::Quadratic => {
                let w: Vec<f64> = self.residual(xk).iter().map(|&r| huber_weight(r, alpha)).collect();
                let dw = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
                let lhs = DMatrix::identity(m, m) * tau + 2.0 * self.b.transpose() * &dw * &self.b;
                let wd: Vec<f64> = w.iter().zip(&self.d).map(|(a, b)| 2.0 * a * b).collect();
                let mut rhs = vec![0.0; m];
                gemv_t(&self.b, &wd, &mut rhs);
                for i in 0..m {
                    rhs[i] += tau * xk[i] - agg[i];
                }
                match crate::linalg::spd_solve(lhs, &rhs) {
                    Some(x) => Ok(x),
                    None => bail!(Numerical, "surrogate system is not positive definite"),
                }
            }
        }
    }
}

/// `min Σᵢ Σⱼ H(bᵢⱼᵀx − dᵢⱼ)`.
#[derive(Debug, Clone)]
pub struct HuberInstance {
    pub agents: Vec<HuberAgent>,
    pub alpha: f64,
    pub x_true: Option<Vec<f64>>,
}

impl HuberInstance {
    pub fn new(agents: Vec<HuberAgent>, alpha: f64) -> Result<Self> {
        if agents.is_empty() {
            bail!(Config, "need at least one agent");
        }
        if !(alpha > 0.0) {
            bail!(Config, "alpha must be positive");
        }
        let m = agents[0].dim();
        if agents.iter().any(|a| a.dim() != m) {
            bail!(Domain, "agents disagree on the dimension");
        }
        Ok(Self { agents, alpha, x_true: None })
    }

    /// `2λmax(Σᵢ BᵢᵀBᵢ)`.
    pub fn lipschitz(&self) -> f64 {
        let m = self.dim();
        let mut g = DMatrix::zeros(m, m);
        for a in &self.agents {
            g += a.b.transpose() * &a.b;
        }
        2.0 * sym_lambda_max(&g)
    }
}

impl CompositeProblem for HuberInstance {
    fn dim(&self) -> usize {
        self.agents[0].dim()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        self.agents.iter().map(|a| a.value(x, self.alpha)).sum()
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; x.len()];
        for a in &self.agents {
            a.gradient(x, self.alpha, &mut g);
            out.iter_mut().zip(&g).for_each(|(o, gi)| *o += gi);
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lipschitz())
    }
}

/// Unit-norm Gaussian rows, `x ~ U[−1,1]ᵐ`, Gaussian noise with deviation `sigma`,
/// one outlier per agent with deviation `5σ`, and `α = 3σ`.
pub fn generate_huber(agents: usize, m: usize, rows: usize, sigma: f64, seed: u64) -> Result<HuberInstance> {
    if agents == 0 || m == 0 || rows == 0 {
        bail!(Config, "agents, m and rows must be positive");
    }
    if !(sigma > 0.0) {
        bail!(Config, "sigma must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = Normal::new(0.0, sigma).map_err(|e| crate::Error::Config(alloc::format!("{e}")))?;
    let mut list = Vec::with_capacity(agents);
    for _ in 0..agents {
        let mut b = DMatrix::from_fn(rows, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        for mut row in b.row_iter_mut() {
            let n = row.norm();
            row /= n;
        }
        let mut d = vec![0.0; rows];
        gemv(&b, &x_true, &mut d);
        for v in d.iter_mut() {
            *v += noise.sample(&mut rng);
        }
        let j = rng.gen_range(0..rows);
        d[j] += 5.0 * sigma * rng.sample::<f64, _>(StandardNormal);
        list.push(HuberAgent::new(b, d)?);
    }
    let mut inst = HuberInstance::new(list, 3.0 * sigma)?;
    inst.x_true = Some(x_true);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::diagnostics::fd_derivative;

    #[test]
    fn huber_is_c1_at_the_knees() {
        for alpha in [0.3, 1.0, 2.5] {
            for r0 in [alpha, -alpha] {
                let left = fd_derivative(|r| huber(r, alpha), r0 - 1e-7, 1e-9);
                let right = fd_derivative(|r| huber(r, alpha), r0 + 1e-7, 1e-9);
                assert!((left - right).abs() < 1e-5);
                assert!((huber_prime(r0 - 1e-12, alpha) - huber_prime(r0 + 1e-12, alpha)).abs() < 1e-10);
            }
            assert!((huber_prime(alpha, alpha) - 2.0 * alpha).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_quadratic_example() {
        let a = HuberAgent::new(DMatrix::from_element(1, 1, 1.0), vec![0.0]).unwrap();
        let x = a.surrogate_solve(&[3.0], &[0.0], 1.0, HuberSurrogate::Quadratic, 1.0).unwrap();
        assert!((x[0] - 1.8).abs() < 1e-14);
    }

    #[test]
    fn own_gradient_aggregate_gives_no_motion() {
        let a = HuberAgent::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]), vec![0.2, 4.0]).unwrap();
        let xk = [0.7, -0.1];
        let mut g = [0.0; 2];
        a.gradient(&xk, 0.5, &mut g);
        let agg = [-g[0], -g[1]];
        let x = a.surrogate_solve(&xk, &agg, 0.5, HuberSurrogate::Linear, 2.0).unwrap();
        assert!((x[0] - xk[0]).abs() < 1e-15 && (x[1] - xk[1]).abs() < 1e-15);
    }
}
