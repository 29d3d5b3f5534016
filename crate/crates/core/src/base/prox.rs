//! Soft-thresholding and Euclidean projections.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::linalg::norm2;

/// `sign(x)·max(|x| − alpha, 0)`, the minimizer of `½(u−x)² + alpha|u|`.
pub fn soft_threshold(x: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        bail!(Domain, "soft-threshold level must be nonnegative, got {alpha}");
    }
    Ok(shrink(x, alpha))
}

/// Unchecked soft-threshold for hot loops; `alpha` must be nonnegative.
#[inline]
pub fn shrink(x: f64, alpha: f64) -> f64 {
    if x > alpha {
        x - alpha
    } else if x < -alpha {
        x + alpha
    } else {
        0.0
    }
}

pub fn soft_threshold_vec(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        bail!(Domain, "soft-threshold level must be nonnegative, got {alpha}");
    }
    Ok(x.iter().map(|&v| shrink(v, alpha)).collect())
}

/// Prox of `lambda‖·‖₂` at `v`: `(1 − lambda/‖v‖)₊ v`.
pub fn block_soft_threshold(v: &mut [f64], lambda: f64) {
    let n = norm2(v);
    let scale = if n > lambda { 1.0 - lambda / n } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= scale);
}

pub fn project_box(v: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if lo.len() != v.len() || hi.len() != v.len() {
        bail!(Domain, "box bounds have mismatched lengths");
    }
    if let Some(i) = (0..v.len()).find(|&i| lo[i] > hi[i]) {
        bail!(Domain, "empty box at coordinate {i}: {} > {}", lo[i], hi[i]);
    }
    Ok(v.iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| x.max(*l).min(*h))
        .collect())
}

pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

pub fn project_ball2(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        bail!(Domain, "ball radius must be positive, got {radius}");
    }
    let n = norm2(v);
    if n <= radius {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x * radius / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(soft_threshold(5.0, 2.0).unwrap(), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0).unwrap(), 0.0);
        assert_eq!(soft_threshold(-7.5, 0.0).unwrap(), -7.5);
        assert!(soft_threshold(1.0, -0.1).is_err());
        assert_eq!(project_nonneg(&[-1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(project_ball2(&[3.0, 4.0], 5.0).unwrap(), vec![3.0, 4.0]);
        let p = project_ball2(&[3.0, 4.0], 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!(project_box(&[0.0], &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn block_soft_threshold_shrinks_radially() {
        let mut v = vec![3.0, 4.0];
        block_soft_threshold(&mut v, 1.0);
        assert!((v[0] - 2.4).abs() < 1e-15 && (v[1] - 3.2).abs() < 1e-15);
        let mut w = vec![0.3, 0.4];
        block_soft_threshold(&mut w, 1.0);
        assert_eq!(w, vec![0.0, 0.0]);
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn projections_are_idempotent_and_nonexpansive(a in vec2(), b in vec2(), r in 0.1f64..5.0) {
            let lo = vec![-1.0, -2.0, 0.0];
            let hi = vec![1.0, 0.5, 3.0];
            let dab = crate::linalg::dist2(&a, &b);
            let pa = project_box(&a, &lo, &hi).unwrap();
            let pb = project_box(&b, &lo, &hi).unwrap();
            prop_assert!(crate::linalg::dist2(&pa, &pb) <= dab + 1e-12);
            prop_assert_eq!(project_box(&pa, &lo, &hi).unwrap(), pa);
            let qa = project_ball2(&a, r).unwrap();
            let qb = project_ball2(&b, r).unwrap();
            prop_assert!(crate::linalg::dist2(&qa, &qb) <= dab + 1e-12);
            let qqa = project_ball2(&qa, r).unwrap();
            prop_assert!(crate::linalg::dist2(&qqa, &qa) <= 1e-12);
            let na = project_nonneg(&a);
            prop_assert!(crate::linalg::dist2(&na, &project_nonneg(&b)) <= dab + 1e-12);
            prop_assert_eq!(project_nonneg(&na), na);
        }

        #[test]
        fn soft_threshold_is_odd_and_contractive(x in -10.0f64..10.0, y in -10.0f64..10.0, a in 0.0f64..5.0) {
            prop_assert_eq!(shrink(-x, a), -shrink(x, a));
            prop_assert!((shrink(x, a) - shrink(y, a)).abs() <= (x - y).abs() + 1e-12);
        }
    }
}
