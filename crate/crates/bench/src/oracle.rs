//! Reference solutions: proximal gradient for convex composite problems and grid search for
//! low-dimensional functions.

use sca_core::base::CompositeProblem;

use crate::error::{BenchError, Result};

pub const PROXGRAD_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Run `x ← prox_{G/L}(x − ∇F(x)/L)` from `x0` until `‖xᵏ⁺¹ − xᵏ‖∞ ≤ tol`.
///
/// `lipschitz` defaults to the problem's hint.
pub fn oracle_proxgrad<P: CompositeProblem + ?Sized>(problem: &P, lipschitz: Option<f64>, x0: &[f64], tol: f64) -> Result<OracleSolution> {
    let m = problem.dim();
    let l = lipschitz
        .or_else(|| problem.lipschitz_hint())
        .ok_or_else(|| BenchError::Oracle("no Lipschitz constant available".into()))?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(BenchError::Oracle(format!("invalid Lipschitz constant {l}")));
    }
    if !(tol > 0.0) {
        return Err(BenchError::Oracle(format!("tolerance must be positive, got {tol}")));
    }
    if x0.len() != m {
        return Err(BenchError::Oracle(format!("x0 has length {}, problem has {m}", x0.len())));
    }
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut g = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut next = vec![0.0; m];
    for k in 1..=PROXGRAD_MAX_ITERS {
        problem.grad_f(&x, &mut g);
        for j in 0..m {
            v[j] = x[j] - g[j] / l;
        }
        problem.prox_block(0..m, &v, 1.0 / l, &mut next);
        let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !step.is_finite() {
            return Err(BenchError::Oracle(format!("iterate became non-finite at iteration {k}")));
        }
        std::mem::swap(&mut x, &mut next);
        if step <= tol {
            let value = problem.value(&x);
            return Ok(OracleSolution { x, value, iterations: k });
        }
    }
    Err(BenchError::Oracle(format!("no fixed point within {PROXGRAD_MAX_ITERS} iterations (tol {tol:e})")))
}

/// Largest number of coarse grid points.
const COARSE_BUDGET: f64 = 1_048_576.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMin {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// Every refined local minimum of the coarse grid whose value ties the best one
    /// (within `1e-9·max(1, |value|)`), best first.
    pub minimizers: Vec<Vec<f64>>,
}

fn grid_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
}

/// Visit every point of a tensor grid in row-major order.
fn for_each_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[usize], &[f64])) {
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&idx, &x);
        let mut c = d;
        loop {
            if c == 0 {
                return;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < axes[c].len() {
                x[c] = axes[c][idx[c]];
                break;
            }
            idx[c] = 0;
            x[c] = axes[c][0];
        }
    }
}

/// Exhaustive grid search over the box `[lo, hi]` followed by one refinement pass at spacing
/// `resolution` around every coarse local minimum.
pub fn oracle_gridmin<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], resolution: f64) -> Result<GridMin> {
    let d = lo.len();
    if d == 0 || hi.len() != d {
        return Err(BenchError::Oracle("box bounds must be nonempty and of equal length".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
        return Err(BenchError::Oracle("box must be finite with lo <= hi".into()));
    }
    if !(resolution > 0.0) {
        return Err(BenchError::Oracle(format!("resolution must be positive, got {resolution}")));
    }
    let per_axis = COARSE_BUDGET.powf(1.0 / d as f64).floor().max(3.0) as usize;
    let counts: Vec<usize> =
        lo.iter().zip(hi).map(|(a, b)| (((b - a) / resolution).ceil() as usize + 1).clamp(1, per_axis)).collect();
    let axes: Vec<Vec<f64>> = (0..d).map(|c| grid_points(lo[c], hi[c], counts[c])).collect();
    let steps: Vec<f64> = (0..d).map(|c| if counts[c] > 1 { (hi[c] - lo[c]) / (counts[c] - 1) as f64 } else { 0.0 }).collect();

    let mut values = Vec::with_capacity(counts.iter().product());
    for_each_point(&axes, |_, x| values.push(f(x)));
    let flat = |idx: &[usize]| idx.iter().zip(&counts).fold(0, |acc, (i, n)| acc * n + i);
    let mut local = Vec::new();
    for_each_point(&axes, |idx, x| {
        let v = values[flat(idx)];
        if !v.is_finite() {
            return;
        }
        let mut nb = idx.to_vec();
        for c in 0..d {
            for delta in [-1isize, 1] {
                let j = idx[c] as isize + delta;
                if j < 0 || j >= counts[c] as isize {
                    continue;
                }
                nb[c] = j as usize;
                if values[flat(&nb)] < v {
                    return;
                }
                nb[c] = idx[c];
            }
        }
        local.push((v, x.to_vec()));
    });
    if local.is_empty() {
        return Err(BenchError::Oracle("function is not finite anywhere on the grid".into()));
    }

    let mut refined: Vec<(f64, Vec<f64>)> = local
        .iter()
        .map(|(_, c)| {
            let fine: Vec<Vec<f64>> = (0..d)
                .map(|k| {
                    let a = (c[k] - steps[k]).max(lo[k]);
                    let b = (c[k] + steps[k]).min(hi[k]);
                    let n = ((b - a) / resolution).ceil() as usize + 1;
                    grid_points(a, b, n.max(1))
                })
                .collect();
            let mut best = (f(c), c.clone());
            for_each_point(&fine, |_, x| {
                let v = f(x);
                if v < best.0 {
                    best = (v, x.to_vec());
                }
            });
            best
        })
        .collect();
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = refined[0].0;
    let tie = 1e-9 * best.abs().max(1.0);
    let mut minimizers: Vec<Vec<f64>> = Vec::new();
    for (v, x) in &refined {
        let far = minimizers.iter().all(|m| m.iter().zip(x).zip(&steps).any(|((a, b), h)| (a - b).abs() > 2.0 * h.max(resolution)));
        if *v <= best + tie && far {
            minimizers.push(x.clone());
        }
    }
    Ok(GridMin { argmin: refined[0].1.clone(), value: best, minimizers })
}
