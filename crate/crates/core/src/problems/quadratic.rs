//! Quadratic `½xᵀQx + bᵀx` with an optional box.

use alloc::vec::Vec;
use core::ops::Range;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::{dot, mat_vec, spd_solve, sym_lambda_max};

#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub b: Vec<f64>,
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != b.len() {
            bail!(Domain, "Q must be square and match b");
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            bail!(Domain, "Q must be symmetric");
        }
        Ok(Self { q, b, bounds: None })
    }

    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != self.b.len() || hi.len() != self.b.len() || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            bail!(Domain, "invalid box");
        }
        self.bounds = Some((lo, hi));
        Ok(self)
    }

    /// `−Q⁻¹b` when `Q` is positive definite.
    pub fn unconstrained_minimizer(&self) -> Option<Vec<f64>> {
        let nb: Vec<f64> = self.b.iter().map(|v| -v).collect();
        spd_solve(self.q.clone(), &nb)
    }
}

/// `Q = MᵀM/m + μI` with a Gaussian-like `M`, and uniform `b`.
pub fn random_spd_quadratic(m: usize, mu: f64, seed: u64) -> Result<Quadratic> {
    if !(mu > 0.0) {
        bail!(Config, "mu must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let q = (a.transpose() * &a) / m as f64 + DMatrix::identity(m, m) * mu;
    let q = (&q + q.transpose()) * 0.5;
    let b = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Quadratic::new(q, b)
}

impl CompositeProblem for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &mat_vec(&self.q, x)) + dot(&self.b, x)
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        let qx = mat_vec(&self.q, x);
        for ((o, a), b) in out.iter_mut().zip(&qx).zip(&self.b) {
            *o = a + b;
        }
    }

    fn block_grad_f(&self, x: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            *o = self.b[i] + (0..x.len()).map(|j| self.q[(i, j)] * x[j]).sum::<f64>();
        }
    }

    fn project_block(&self, block: Range<usize>, v: &mut [f64]) {
        if let Some((lo, hi)) = &self.bounds {
            for (vi, i) in v.iter_mut().zip(block) {
                *vi = vi.max(lo[i]).min(hi[i]);
            }
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(sym_lambda_max(&self.q))
    }
}
