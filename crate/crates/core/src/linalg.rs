//! Small dense helpers on slices and column-major matrices.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Column `j` of a column-major matrix as a slice.
pub fn column(a: &DMatrix<f64>, j: usize) -> &[f64] {
    let q = a.nrows();
    &a.as_slice()[j * q..(j + 1) * q]
}

/// `out = A x`.
pub fn gemv(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, xj) in x.iter().enumerate() {
        if *xj != 0.0 {
            axpy(*xj, column(a, j), out);
        }
    }
}

/// `out = Aᵀ r`.
pub fn gemv_t(a: &DMatrix<f64>, r: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = dot(column(a, j), r);
    }
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    gemv(a, x, &mut out);
    out
}

pub fn mat_t_vec(a: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.ncols()];
    gemv_t(a, r, &mut out);
    out
}

/// Largest eigenvalue of `AᵀA` by 50 power iterations from the normalized ones vector.
pub fn power_lambda_max_ata(a: &DMatrix<f64>) -> f64 {
    power_lambda_max_ata_iters(a, 50)
}

pub fn power_lambda_max_ata_iters(a: &DMatrix<f64>, iters: usize) -> f64 {
    let m = a.ncols();
    if m == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut av = vec![0.0; a.nrows()];
    let mut w = vec![0.0; m];
    let mut lambda = 0.0;
    for _ in 0..iters {
        gemv(a, &v, &mut av);
        gemv_t(a, &av, &mut w);
        lambda = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    lambda
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Solve a symmetric positive definite system by Cholesky.
pub fn spd_solve(m: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let chol = m.cholesky()?;
    let b = nalgebra::DVector::from_column_slice(rhs);
    Some(chol.solve(&b).as_slice().to_vec())
}
