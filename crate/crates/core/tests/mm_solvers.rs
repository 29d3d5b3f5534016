use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::mm::matcomp::{l_update, singular_values_desc, svt_objective, MatCompState};
use sca_core::mm::{matcomp_block_mm, nnls_mm, MmConfig, NnlsVariant};
use sca_core::penalties::DcPenalty;

fn rank_one_plus_spike() -> (DMatrix<f64>, (usize, usize)) {
    let u = [1.0, 2.0, -1.0, 0.5, 1.5];
    let v = [2.0, -1.0, 1.0, 1.0, 0.5];
    let mut y = DMatrix::from_fn(5, 5, |i, j| u[i] * v[j]);
    y[(1, 3)] += 8.0;
    (y, (1, 3))
}

#[test]
fn rank_one_plus_spike_is_separated() {
    let (y, spike) = rank_one_plus_spike();
    let st = MatCompState {
        y: y.clone(),
        mask: DMatrix::from_element(5, 5, true),
        l: DMatrix::zeros(5, 5),
        s: DMatrix::zeros(5, 5),
        lambda_r: 2.0,
        lambda_s: 0.5,
        g_r: DcPenalty::log(2.0).unwrap(),
        g_s: DcPenalty::log(2.0).unwrap(),
    };
    let cfg = MmConfig { max_iters: 5000, ..MmConfig::default() };
    let r = matcomp_block_mm(st, &cfg).unwrap();
    let sig = singular_values_desc(&r.l);
    assert!(sig[1] / sig[0] <= 1e-3);
    let total: f64 = r.s.iter().map(|v| v.abs()).sum();
    assert!(r.s[spike].abs() >= 0.9 * total);
    assert!(r.max_chain_violation() <= 1e-10);
}

proptest! {
    #[test]
    fn von_neumann_trace_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let bound: f64 = singular_values_desc(&a)
            .iter()
            .zip(singular_values_desc(&b))
            .map(|(x, y)| x * y)
            .sum();
        prop_assert!((&a * &b).trace().abs() <= bound + 1e-12);
    }
}

#[test]
fn l_update_beats_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = DcPenalty::exp(1.5).unwrap();
    let st = MatCompState {
        y: DMatrix::from_fn(4, 5, |_, _| rng.gen_range(-2.0..2.0)),
        mask: DMatrix::from_fn(4, 5, |_, _| rng.gen_bool(0.7)),
        l: DMatrix::from_fn(4, 5, |_, _| rng.gen_range(-1.0..1.0)),
        s: DMatrix::from_fn(4, 5, |_, _| rng.gen_range(-0.1..0.1)),
        lambda_r: 0.8,
        lambda_s: 0.5,
        g_r: g,
        g_s: g,
    };
    let l_new = l_update(&st).unwrap();
    let mut xk = st.l.clone();
    for i in 0..4 {
        for j in 0..5 {
            if st.mask[(i, j)] {
                xk[(i, j)] = st.y[(i, j)] - st.s[(i, j)];
            }
        }
    }
    let w: Vec<f64> = singular_values_desc(&st.l).iter().map(|&s| g.dg_minus(s)).collect();
    let best = svt_objective(&l_new, &xk, st.lambda_r, g.eta(), &w);
    for _ in 0..50 {
        let p = &l_new + DMatrix::from_fn(4, 5, |_, _| rng.gen_range(-0.1..0.1));
        assert!(svt_objective(&p, &xk, st.lambda_r, g.eta(), &w) >= best - 1e-12);
    }
}

/// Exhaustive active-set enumeration for tiny NNLS instances.
fn nnls_active_set_oracle(a: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let zv = nalgebra::DVector::from_column_slice(z);
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut x = vec![0.0; n];
        if !free.is_empty() {
            let af = a.select_columns(free.iter());
            let Some(sol) = (af.transpose() * &af).cholesky().map(|c| c.solve(&(af.transpose() * &zv))) else {
                continue;
            };
            if sol.iter().any(|v| *v < 0.0) {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] = sol[k];
            }
        }
        let r = a * nalgebra::DVector::from_column_slice(&x) - &zv;
        if r.norm_squared() < best.0 {
            best = (r.norm_squared(), x);
        }
    }
    best.1
}

#[test]
fn nnls_variants_match_active_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = DMatrix::from_fn(5, 3, |_, _| rng.gen_range(0.1..1.0));
    let z: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
    let oracle = nnls_active_set_oracle(&a, &z);
    let cfg = MmConfig { max_iters: 200_000, tol_relative_descent: 1e-16, tol_iterate_delta: 1e-13, ..MmConfig::default() };
    for variant in [NnlsVariant::GradProj, NnlsVariant::Multiplicative] {
        let t = nnls_mm(&a, &z, variant, &[1.0; 3], &cfg).unwrap();
        let gap: f64 = t.x.iter().zip(&oracle).map(|(x, o)| (x - o).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-5, "{variant:?} gap {gap} x {:?} oracle {oracle:?}", t.x);
        assert!(t.max_chain_violation() <= 1e-10);
    }
}
