//! Nonnegative least squares `min ‖z − Ax‖²` over `x ≥ 0`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::{mm_minimize, MmConfig, MmProblem, MmTrace};
use crate::error::{bail, Result};
use crate::linalg::{dot, gemv, gemv_t, sym_lambda_max};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnlsVariant {
    /// Projected gradient with step `1/λmax(AᵀA)`.
    GradProj,
    /// Diagonal majorizer `(AᵀAy)ᵢ/yᵢ`, giving the multiplicative update.
    Multiplicative,
}

pub struct Nnls<'a> {
    a: &'a DMatrix<f64>,
    z: &'a [f64],
    atz: Vec<f64>,
    lambda_max: f64,
    variant: NnlsVariant,
}

impl<'a> Nnls<'a> {
    pub fn new(a: &'a DMatrix<f64>, z: &'a [f64], variant: NnlsVariant) -> Result<Self> {
        if z.len() != a.nrows() {
            bail!(Domain, "z has length {}, A has {} rows", z.len(), a.nrows());
        }
        if variant == NnlsVariant::Multiplicative {
            if a.iter().any(|&v| !(v > 0.0)) {
                bail!(Config, "multiplicative NNLS needs a strictly positive A");
            }
            if z.iter().any(|&v| v < 0.0) || z.iter().all(|&v| v == 0.0) {
                bail!(Config, "multiplicative NNLS needs z >= 0 and z != 0");
            }
        }
        let mut atz = vec![0.0; a.ncols()];
        gemv_t(a, z, &mut atz);
        let lambda_max = sym_lambda_max(&(a.transpose() * a));
        Ok(Self { a, z, atz, lambda_max, variant })
    }

    fn ata(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.a.nrows()];
        gemv(self.a, x, &mut ax);
        let mut out = vec![0.0; self.a.ncols()];
        gemv_t(self.a, &ax, &mut out);
        out
    }
}

impl MmProblem for Nnls<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.a.nrows()];
        gemv(self.a, x, &mut r);
        r.iter_mut().zip(self.z).for_each(|(ri, zi)| *ri = zi - *ri);
        dot(&r, &r)
    }

    fn surrogate_value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let qy = self.ata(y);
        match self.variant {
            NnlsVariant::GradProj => {
                let lin: f64 = (0..x.len()).map(|i| 2.0 * (qy[i] - self.atz[i]) * (x[i] - y[i])).sum();
                let quad: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Some(self.objective(y) + lin + self.lambda_max * quad)
            }
            NnlsVariant::Multiplicative => {
                let zz = dot(self.z, self.z);
                let lin = -2.0 * dot(&self.atz, x);
                let quad: f64 = (0..x.len()).map(|i| qy[i] * x[i] * x[i] / y[i]).sum();
                Some(zz + lin + quad)
            }
        }
    }

    fn minimize_surrogate(&self, y: &[f64]) -> Result<Vec<f64>> {
        let qy = self.ata(y);
        Ok(match self.variant {
            NnlsVariant::GradProj => (0..y.len())
                .map(|i| (y[i] - (qy[i] - self.atz[i]) / self.lambda_max).max(0.0))
                .collect(),
            NnlsVariant::Multiplicative => (0..y.len()).map(|i| self.atz[i] / qy[i] * y[i]).collect(),
        })
    }
}

pub fn nnls_mm(
    a: &DMatrix<f64>,
    z: &[f64],
    variant: NnlsVariant,
    x0: &[f64],
    config: &MmConfig,
) -> Result<MmTrace> {
    if x0.len() != a.ncols() {
        bail!(Domain, "x0 has length {}, A has {} columns", x0.len(), a.ncols());
    }
    if variant == NnlsVariant::Multiplicative && x0.iter().any(|&v| !(v > 0.0)) {
        bail!(Config, "multiplicative NNLS needs x0 > 0");
    }
    if variant == NnlsVariant::GradProj && x0.iter().any(|&v| v < 0.0) {
        bail!(Config, "x0 must be nonnegative");
    }
    let p = Nnls::new(a, z, variant)?;
    mm_minimize(&p, x0, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_recovers_nonnegative_target() {
        let a = DMatrix::<f64>::identity(2, 2);
        let cfg = MmConfig::default();
        let t = nnls_mm(&a, &[1.5, 2.0], NnlsVariant::GradProj, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(t.x, vec![1.5, 2.0]);
        let t = nnls_mm(&a, &[-1.0, 2.0], NnlsVariant::GradProj, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(t.x, vec![0.0, 2.0]);
    }

    #[test]
    fn multiplicative_preconditions() {
        let a = DMatrix::<f64>::identity(2, 2);
        let cfg = MmConfig::default();
        assert!(nnls_mm(&a, &[1.0, 2.0], NnlsVariant::Multiplicative, &[1.0, 1.0], &cfg).is_err());
        let pos = DMatrix::from_element(2, 2, 1.0);
        assert!(nnls_mm(&pos, &[0.0, 0.0], NnlsVariant::Multiplicative, &[1.0, 1.0], &cfg).is_err());
        assert!(nnls_mm(&pos, &[1.0, 0.0], NnlsVariant::Multiplicative, &[0.0, 1.0], &cfg).is_err());
    }
}
