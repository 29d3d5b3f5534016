//! Group LASSO `½‖z − Ax‖² + λ Σᵢ ‖xᵢ‖₂` over a block partition.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use nalgebra::DMatrix;

use crate::base::partition::BlockPartition;
use crate::base::problem::CompositeProblem;
use crate::base::prox::block_soft_threshold;
use crate::error::{bail, Result};
use crate::linalg::{dot, gemv, gemv_t, norm2, sym_lambda_max};

#[derive(Debug, Clone)]
pub struct GroupLasso {
    pub a: DMatrix<f64>,
    pub z: Vec<f64>,
    pub lambda: f64,
    pub partition: BlockPartition,
}

impl GroupLasso {
    pub fn new(a: DMatrix<f64>, z: Vec<f64>, lambda: f64, partition: BlockPartition) -> Result<Self> {
        if z.len() != a.nrows() || partition.total() != a.ncols() {
            bail!(Domain, "A, z and the partition disagree on dimensions");
        }
        if !(lambda > 0.0) {
            bail!(Config, "lambda must be positive");
        }
        Ok(Self { a, z, lambda, partition })
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.a.nrows()];
        gemv(&self.a, x, &mut r);
        r.iter_mut().zip(&self.z).for_each(|(ri, zi)| *ri -= zi);
        r
    }
}

impl CompositeProblem for GroupLasso {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        gemv_t(&self.a, &self.residual(x), out);
    }

    fn eval_g(&self, x: &[f64]) -> f64 {
        (0..self.partition.len()).map(|i| self.lambda * norm2(self.partition.block(x, i))).sum()
    }

    fn eval_g_block(&self, _block: Range<usize>, xi: &[f64]) -> f64 {
        self.lambda * norm2(xi)
    }

    fn g_is_zero(&self) -> bool {
        false
    }

    /// Block soft-threshold `(1 − tλ/‖v‖)₊ v`; `block` must be a whole group or a union of groups.
    fn prox_block(&self, block: Range<usize>, v: &[f64], t: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        let start = block.start;
        for i in 0..self.partition.len() {
            let r = self.partition.range(i);
            if r.start >= block.start && r.end <= block.end {
                block_soft_threshold(&mut out[r.start - start..r.end - start], t * self.lambda);
            }
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(sym_lambda_max(&(self.a.transpose() * &self.a)))
    }
}
