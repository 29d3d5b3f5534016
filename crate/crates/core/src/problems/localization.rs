//! Target localization `Σᵢ Σₜ pᵢₜ (dᵢₜ − ‖xₜ − sᵢ‖²)²` from squared sensor distances.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::{dot, spd_solve, sym_lambda_max};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizationSurrogate {
    /// Linearization plus `(τ/2)‖x − xᵏ‖²`.
    Linear,
    /// Keeps the convex quadratic `xₜᵀSᵢxₜ` and linearizes the rest.
    PartialConvex,
}

const BOX_QP_MAX_ITERS: usize = 10_000;
const BOX_QP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LocalizationInstance {
    /// Sensor coordinates, one row per sensor.
    pub sensors: DMatrix<f64>,
    pub targets: usize,
    /// Squared distances, sensors × targets.
    pub d: DMatrix<f64>,
    pub p: DMatrix<bool>,
    /// The same box for every target, or `None` for the whole space.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
    pub truth: Option<Vec<f64>>,
}

impl LocalizationInstance {
    pub fn new(sensors: DMatrix<f64>, targets: usize, d: DMatrix<f64>, p: DMatrix<bool>) -> Result<Self> {
        let i = sensors.nrows();
        if d.shape() != (i, targets) || p.shape() != (i, targets) {
            bail!(Domain, "d and p must be sensors × targets");
        }
        if targets == 0 || sensors.ncols() == 0 {
            bail!(Config, "need at least one target and one coordinate");
        }
        Ok(Self { sensors, targets, d, p, bounds: None, truth: None })
    }

    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let k = self.space_dim();
        if lo.len() != k || hi.len() != k || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            bail!(Domain, "invalid box");
        }
        self.bounds = Some((lo, hi));
        Ok(self)
    }

    pub fn agents(&self) -> usize {
        self.sensors.nrows()
    }

    pub fn space_dim(&self) -> usize {
        self.sensors.ncols()
    }

    /// Length of the stacked variable `(x₁, …, xₙ)`.
    pub fn dim(&self) -> usize {
        self.targets * self.space_dim()
    }

    fn sensor(&self, i: usize) -> Vec<f64> {
        self.sensors.row(i).iter().copied().collect()
    }

    fn target<'a>(&self, x: &'a [f64], t: usize) -> &'a [f64] {
        let k = self.space_dim();
        &x[t * k..(t + 1) * k]
    }

    /// `fᵢ(x)`.
    pub fn agent_value(&self, i: usize, x: &[f64]) -> f64 {
        let s = self.sensor(i);
        (0..self.targets)
            .filter(|&t| self.p[(i, t)])
            .map(|t| {
                let xt = self.target(x, t);
                let e = self.d[(i, t)] - dist2_sq(xt, &s);
                e * e
            })
            .sum()
    }

    /// `∇fᵢ(x)`, block `t` equal to `−4pᵢₜ(dᵢₜ − ‖xₜ − sᵢ‖²)(xₜ − sᵢ)`.
    pub fn agent_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = self.sensor(i);
        let k = self.space_dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.targets {
            if !self.p[(i, t)] {
                continue;
            }
            let xt = self.target(x, t);
            let e = self.d[(i, t)] - dist2_sq(xt, &s);
            for c in 0..k {
                out[t * k + c] = -4.0 * e * (xt[c] - s[c]);
            }
        }
    }

    /// `Sᵢ = 4sᵢsᵢᵀ + 2‖sᵢ‖²I`.
    pub fn s_matrix(&self, i: usize) -> DMatrix<f64> {
        let s = self.sensor(i);
        let k = s.len();
        let ns = dot(&s, &s);
        DMatrix::from_fn(k, k, |a, b| 4.0 * s[a] * s[b] + if a == b { 2.0 * ns } else { 0.0 })
    }

    /// `bᵢₜᵏ = 4‖sᵢ‖²sᵢ − 4(‖xₜᵏ‖² − dᵢₜ)(xₜᵏ − sᵢ) + 8(sᵢᵀxₜᵏ)xₜᵏ`.
    pub fn b_vector(&self, i: usize, t: usize, xk: &[f64]) -> Vec<f64> {
        let s = self.sensor(i);
        let xt = self.target(xk, t);
        let ns = dot(&s, &s);
        let nx = dot(xt, xt);
        let sx = dot(&s, xt);
        (0..s.len())
            .map(|c| 4.0 * ns * s[c] - 4.0 * (nx - self.d[(i, t)]) * (xt[c] - s[c]) + 8.0 * sx * xt[c])
            .collect()
    }

    pub fn surrogate_value(&self, i: usize, x: &[f64], xk: &[f64], variant: LocalizationSurrogate, tau: f64) -> f64 {
        let prox = 0.5 * tau * x.iter().zip(xk).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let base = self.agent_value(i, xk);
        match variant {
            LocalizationSurrogate::Linear => {
                let mut g = vec![0.0; xk.len()];
                self.agent_gradient(i, xk, &mut g);
                let d: Vec<f64> = x.iter().zip(xk).map(|(a, b)| a - b).collect();
                base + dot(&g, &d) + prox
            }
            LocalizationSurrogate::PartialConvex => {
                let sm = self.s_matrix(i);
                let mut v = base + prox;
                for t in (0..self.targets).filter(|&t| self.p[(i, t)]) {
                    let xt = self.target(x, t);
                    let xkt = self.target(xk, t);
                    let b = self.b_vector(i, t, xk);
                    let diff: Vec<f64> = xt.iter().zip(xkt).map(|(a, c)| a - c).collect();
                    v += quad(&sm, xt) - quad(&sm, xkt) - dot(&b, &diff);
                }
                v
            }
        }
    }

    pub fn surrogate_gradient(&self, i: usize, x: &[f64], xk: &[f64], variant: LocalizationSurrogate, tau: f64, out: &mut [f64]) {
        match variant {
            LocalizationSurrogate::Linear => self.agent_gradient(i, xk, out),
            LocalizationSurrogate::PartialConvex => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let sm = self.s_matrix(i);
                let k = self.space_dim();
                for t in (0..self.targets).filter(|&t| self.p[(i, t)]) {
                    let xt = self.target(x, t);
                    let b = self.b_vector(i, t, xk);
                    for c in 0..k {
                        out[t * k + c] = 2.0 * (0..k).map(|e| sm[(c, e)] * xt[e]).sum::<f64>() - b[c];
                    }
                }
            }
        }
        for ((o, a), b) in out.iter_mut().zip(x).zip(xk) {
            *o += tau * (a - b);
        }
    }

    /// Minimizer over `X` of `f̃ᵢ(·|xᵏ) + aggᵀ(· − xᵏ)`, solved target by target.
    pub fn surrogate_solve(&self, i: usize, xk: &[f64], agg: &[f64], variant: LocalizationSurrogate, tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            bail!(Config, "tau must be positive");
        }
        let k = self.space_dim();
        let mut out = vec![0.0; self.dim()];
        match variant {
            LocalizationSurrogate::Linear => {
                let mut g = vec![0.0; self.dim()];
                self.agent_gradient(i, xk, &mut g);
                for j in 0..self.dim() {
                    out[j] = xk[j] - (g[j] + agg[j]) / tau;
                }
                for t in 0..self.targets {
                    self.project_target(&mut out[t * k..(t + 1) * k]);
                }
            }
            LocalizationSurrogate::PartialConvex => {
                let sm = self.s_matrix(i);
                for t in 0..self.targets {
                    let pit = if self.p[(i, t)] { 1.0 } else { 0.0 };
                    let xkt = self.target(xk, t);
                    let b = if pit > 0.0 { self.b_vector(i, t, xk) } else { vec![0.0; k] };
                    let h = &sm * (2.0 * pit) + DMatrix::identity(k, k) * tau;
                    let rhs: Vec<f64> = (0..k).map(|c| pit * b[c] + tau * xkt[c] - agg[t * k + c]).collect();
                    let sol = self.box_qp(h, &rhs)?;
                    out[t * k..(t + 1) * k].copy_from_slice(&sol);
                }
            }
        }
        Ok(out)
    }

    /// `argmin_{x ∈ box} ½xᵀHx − rhsᵀx` for positive definite `H`.
    fn box_qp(&self, h: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
        let Some(mut x) = spd_solve(h.clone(), rhs) else {
            bail!(Numerical, "surrogate system is not positive definite");
        };
        if self.bounds.is_none() {
            return Ok(x);
        }
        let before = x.clone();
        self.project_target(&mut x);
        if x == before {
            return Ok(x);
        }
        let step = 1.0 / sym_lambda_max(&h);
        let k = x.len();
        for _ in 0..BOX_QP_MAX_ITERS {
            let grad: Vec<f64> = (0..k).map(|a| (0..k).map(|b| h[(a, b)] * x[b]).sum::<f64>() - rhs[a]).collect();
            let mut next: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
            self.project_target(&mut next);
            let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if moved <= BOX_QP_TOL {
                break;
            }
        }
        Ok(x)
    }

    pub fn project_target(&self, v: &mut [f64]) {
        if let Some((lo, hi)) = &self.bounds {
            for ((vi, l), h) in v.iter_mut().zip(lo).zip(hi) {
                *vi = vi.max(*l).min(*h);
            }
        }
    }
}

fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let k = x.len();
    (0..k).map(|a| (0..k).map(|b| x[a] * m[(a, b)] * x[b]).sum::<f64>()).sum()
}

impl CompositeProblem for LocalizationInstance {
    fn dim(&self) -> usize {
        LocalizationInstance::dim(self)
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        (0..self.agents()).map(|i| self.agent_value(i, x)).sum()
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; x.len()];
        for i in 0..self.agents() {
            self.agent_gradient(i, x, &mut g);
            out.iter_mut().zip(&g).for_each(|(o, gi)| *o += gi);
        }
    }

    fn project_block(&self, block: core::ops::Range<usize>, v: &mut [f64]) {
        if let Some((lo, hi)) = &self.bounds {
            let k = self.space_dim();
            for (vi, j) in v.iter_mut().zip(block) {
                *vi = vi.max(lo[j % k]).min(hi[j % k]);
            }
        }
    }
}

/// Sensors and targets uniform in `[0,1]^dim`; each target is seen by every sensor with probability
/// `p_obs`, and by at least `dim + 1` sensors.
pub fn generate_localization(
    sensors: usize,
    targets: usize,
    dim: usize,
    p_obs: f64,
    noise_std: f64,
    seed: u64,
) -> Result<LocalizationInstance> {
    if sensors < dim + 1 {
        bail!(Config, "need at least dim + 1 sensors");
    }
    if !(p_obs > 0.0 && p_obs <= 1.0) || !(noise_std >= 0.0) {
        bail!(Config, "invalid observation probability or noise level");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = DMatrix::from_fn(sensors, dim, |_, _| rng.gen_range(0.0..1.0));
    let truth: Vec<f64> = (0..targets * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut p = DMatrix::from_fn(sensors, targets, |_, _| rng.gen_bool(p_obs));
    for t in 0..targets {
        let mut seen = p.column(t).iter().filter(|v| **v).count();
        let mut i = 0;
        while seen < dim + 1 {
            if !p[(i, t)] {
                p[(i, t)] = true;
                seen += 1;
            }
            i += 1;
        }
    }
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).map_err(|e| crate::Error::Config(alloc::format!("{e}")))?;
    let d = DMatrix::from_fn(sensors, targets, |i, t| {
        let e: f64 = (0..dim).map(|c| (truth[t * dim + c] - s[(i, c)]).powi(2)).sum();
        if noise_std > 0.0 {
            e + normal.sample(&mut rng)
        } else {
            e
        }
    });
    let mut inst = LocalizationInstance::new(s, targets, d, p)?;
    inst.truth = Some(truth);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::diagnostics::{fd_gradient, relative_gap};

    fn toy() -> LocalizationInstance {
        LocalizationInstance::new(
            DMatrix::from_element(1, 1, 1.0),
            1,
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, true),
        )
        .unwrap()
    }

    #[test]
    fn gradient_vanishes_at_sensor_and_truth_is_a_zero() {
        let inst = generate_localization(5, 2, 2, 0.6, 0.0, 4).unwrap();
        let truth = inst.truth.clone().unwrap();
        assert!(inst.eval_f(&truth) < 1e-24);
        let mut x = truth.clone();
        x[0] = inst.sensors[(0, 0)];
        x[1] = inst.sensors[(0, 1)];
        let mut g = vec![0.0; 4];
        inst.agent_gradient(0, &x, &mut g);
        assert_eq!(&g[..2], &[0.0, 0.0]);
    }

    #[test]
    fn surrogates_are_gradient_consistent() {
        let inst = generate_localization(4, 2, 2, 1.0, 0.05, 8).unwrap();
        let xk = [0.3, 0.8, -0.2, 0.5];
        let mut g = vec![0.0; 4];
        inst.agent_gradient(1, &xk, &mut g);
        for v in [LocalizationSurrogate::Linear, LocalizationSurrogate::PartialConvex] {
            let mut sg = vec![0.0; 4];
            inst.surrogate_gradient(1, &xk, &xk, v, 3.0, &mut sg);
            assert!(relative_gap(&sg, &g) < 1e-12, "{v:?}");
            let fd = fd_gradient(|z| inst.surrogate_value(1, z, &xk, v, 3.0), &xk, 1e-6);
            assert!(relative_gap(&fd, &g) < 1e-6, "{v:?}");
            assert!((inst.surrogate_value(1, &xk, &xk, v, 3.0) - inst.agent_value(1, &xk)).abs() < 1e-12);
        }
    }

    #[test]
    fn sensor_at_origin_makes_variants_agree() {
        let mut inst = toy();
        inst.sensors[(0, 0)] = 0.0;
        assert_eq!(inst.s_matrix(0)[(0, 0)], 0.0);
        let xk = [0.5];
        let a = inst.surrogate_solve(0, &xk, &[0.0], LocalizationSurrogate::Linear, 4.0).unwrap();
        let b = inst.surrogate_solve(0, &xk, &[0.0], LocalizationSurrogate::PartialConvex, 4.0).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-14);
    }

    #[test]
    fn box_qp_respects_bounds() {
        let inst = toy().with_box(vec![0.0], vec![0.6]).unwrap();
        let x = inst.surrogate_solve(0, &[0.5], &[-100.0], LocalizationSurrogate::PartialConvex, 1.0).unwrap();
        assert!((x[0] - 0.6).abs() < 1e-12);
    }
}
