use core::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::base::merit::prox_gradient_residual;
use sca_core::base::{BlockPartition, CompositeProblem, Schedule};
use sca_core::flexa::*;
use sca_core::linalg::{dist2, dot};
use sca_core::mm::{mm_minimize, MmConfig, ProxGradientMm};
use sca_core::problems::*;

/// `½Σ(xᵢ − cᵢ)² + λ‖x‖₁` over an optional box.
struct Separable {
    c: Vec<f64>,
    lambda: f64,
    lo: f64,
    hi: f64,
}

impl CompositeProblem for Separable {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.c).map(|(a, c)| 0.5 * (a - c) * (a - c)).sum()
    }
    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), c) in out.iter_mut().zip(x).zip(&self.c) {
            *o = a - c;
        }
    }
    fn eval_g(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }
    fn eval_g_block(&self, _b: Range<usize>, xi: &[f64]) -> f64 {
        self.lambda * xi.iter().map(|v| v.abs()).sum::<f64>()
    }
    fn g_is_zero(&self) -> bool {
        self.lambda == 0.0
    }
    fn prox_block(&self, _b: Range<usize>, v: &[f64], t: f64, out: &mut [f64]) {
        for (o, vi) in out.iter_mut().zip(v) {
            let s = vi.signum() * (vi.abs() - t * self.lambda).max(0.0);
            *o = s.clamp(self.lo, self.hi);
        }
    }
}

/// `½‖x − c‖² + λ‖x‖₂`, flagged nonseparable.
struct Coupled {
    c: Vec<f64>,
    lambda: f64,
}

impl CompositeProblem for Coupled {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.c).map(|(a, c)| 0.5 * (a - c) * (a - c)).sum()
    }
    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), c) in out.iter_mut().zip(x).zip(&self.c) {
            *o = a - c;
        }
    }
    fn eval_g(&self, x: &[f64]) -> f64 {
        self.lambda * dot(x, x).sqrt()
    }
    fn g_is_zero(&self) -> bool {
        false
    }
    fn g_separable(&self) -> bool {
        false
    }
}

fn scalar(c: f64, lambda: f64, lo: f64, hi: f64) -> Separable {
    Separable { c: vec![c], lambda, lo, hi }
}

fn cfg(max_iters: usize, stop_tol: f64, tau: f64) -> FlexaConfig {
    FlexaConfig { max_iters, stop_tol, tau: TauPolicy::Uniform(tau), record_iterates: true, ..FlexaConfig::default() }
}

#[test]
fn prox_linear_examples() {
    let inf = f64::INFINITY;
    assert_eq!(best_response_prox_linear(&scalar(2.0, 1.0, -inf, inf), 0..1, &[0.0], 1.0).unwrap(), vec![1.0]);
    assert_eq!(best_response_prox_linear(&scalar(2.0, 0.0, 0.0, 1.0), 0..1, &[0.0], 1.0).unwrap(), vec![1.0]);
    assert_eq!(best_response_prox_linear(&scalar(0.7, 0.0, -inf, inf), 0..1, &[0.7], 3.0).unwrap(), vec![0.7]);
    assert!(best_response_prox_linear(&scalar(0.0, 0.0, -inf, inf), 0..1, &[0.0], 0.0).is_err());
}

#[test]
fn error_bound_examples() {
    let p = scalar(0.75, 0.0, f64::NEG_INFINITY, f64::INFINITY);
    let e = error_bound(&p, ErrorBound::ProxGradient, 0..1, &[1.0], &[0.25], None).unwrap();
    assert!((e - 0.25).abs() < 1e-15);
    let e = error_bound(&p, ErrorBound::Displacement, 0..1, &[1.0], &[0.25], Some(&[1.0])).unwrap();
    assert_eq!(e, 0.0);
    assert!(error_bound(&p, ErrorBound::Displacement, 0..1, &[1.0], &[0.25], None).is_err());
}

#[test]
fn lasso_displacement_and_prox_residual_vanish_together() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..50 {
        let p = generate_lasso(8, 12, 0.25, seed).unwrap();
        let part = BlockPartition::scalar(8).unwrap();
        let tau = p.tau_heuristic();
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r = p.residual(&x);
        let disp: f64 = (0..8).map(|i| (p.best_response_scalar(i, &x, &r, tau).unwrap() - x[i]).abs()).fold(0.0, f64::max);
        assert!(disp > 0.0 && prox_gradient_residual(&p, &x) > 0.0);

        let run = flexa_run(&p, &part, &LassoExact, &SelectionRule::All, Schedule::constant(0.5).unwrap(),
            &InexactPolicy::exact(), &x, &cfg(20_000, 1e-11, tau)).unwrap();
        assert_eq!(run.stop, FlexaStop::Stationary);
        let r = p.residual(&run.x);
        let disp: f64 = (0..8).map(|i| (p.best_response_scalar(i, &run.x, &r, tau).unwrap() - run.x[i]).abs()).fold(0.0, f64::max);
        assert!(disp <= 1e-11 && prox_gradient_residual(&p, &run.x) <= 1e-9);
    }
}

#[test]
fn all_blocks_with_unit_step_is_proximal_gradient_mm() {
    let p = generate_lasso(5, 8, 0.4, 3).unwrap();
    let l = p.lipschitz();
    let x0 = vec![0.3, -0.2, 0.0, 1.0, 0.5];
    let flexa = flexa_run(&p, &BlockPartition::scalar(5).unwrap(), &ProxLinear, &SelectionRule::All,
        Schedule::constant(1.0).unwrap(), &InexactPolicy::exact(), &x0, &cfg(40, 0.0, l)).unwrap();
    let mm_cfg = MmConfig { max_iters: 40, tol_relative_descent: 1e-300, tol_iterate_delta: 1e-300, ..MmConfig::default() };
    let mm = mm_minimize(&ProxGradientMm::new(&p, l).unwrap(), &x0, &mm_cfg).unwrap();
    let k = flexa.iterates.len().min(mm.iterates.len());
    assert!(k > 10);
    for (a, b) in flexa.iterates[..k].iter().zip(&mm.iterates[..k]) {
        assert!(dist2(a, b) <= 1e-13);
    }
}

#[test]
fn strongly_convex_quadratic_reaches_closed_form() {
    let p = random_spd_quadratic(20, 0.5, 11).unwrap();
    let star = p.unconstrained_minimizer().unwrap();
    let l = p.lipschitz_hint().unwrap();
    let run = flexa_run(&p, &BlockPartition::scalar(20).unwrap(), &ProxLinear, &SelectionRule::All,
        Schedule::constant(1.0).unwrap(), &InexactPolicy::exact(), &[0.0; 20], &cfg(500, 1e-12, l)).unwrap();
    assert!(run.iterations() <= 500);
    assert!(dist2(&run.x, &star) <= 1e-8, "distance {}", dist2(&run.x, &star));
}

#[test]
fn stationary_start_gives_constant_trajectory() {
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]));
    let p = Quadratic::new(q, vec![-2.0, -4.0]).unwrap();
    let x0 = vec![1.0, 1.0];
    let run = flexa_run(&p, &BlockPartition::scalar(2).unwrap(), &ProxLinear, &SelectionRule::All,
        Schedule::constant(1.0).unwrap(), &InexactPolicy::exact(), &x0, &cfg(5, 0.0, 4.0)).unwrap();
    assert_eq!(run.stop, FlexaStop::Stationary);
    assert_eq!(run.x, x0);
    assert!(run.iterates.iter().all(|x| *x == x0));
}

#[test]
fn terminal_points_are_stationary() {
    for seed in 0..10 {
        let p = generate_lasso(4, 6, 0.5, seed).unwrap();
        let tol = 1e-9;
        let run = flexa_run(&p, &BlockPartition::scalar(4).unwrap(), &ProxLinear, &SelectionRule::All,
            Schedule::constant(1.0).unwrap(), &InexactPolicy::exact(), &[0.0; 4], &cfg(100_000, tol, p.lipschitz())).unwrap();
        assert_eq!(run.stop, FlexaStop::Stationary);
        assert!(prox_gradient_residual(&p, &run.x) <= 10.0 * tol);
    }
}

#[test]
fn one_worker_is_a_gauss_seidel_sweep() {
    let p = random_spd_quadratic(6, 0.5, 2).unwrap();
    let part = BlockPartition::scalar(6).unwrap();
    let x0 = vec![1.0; 6];
    let l = p.lipschitz_hint().unwrap();
    let gs = flexa_parallel_cyclic(&p, &part, &ProxLinear, &[(0..6).collect()], Schedule::constant(0.7).unwrap(),
        &InexactPolicy::exact(), &x0, &cfg(10, 0.0, l)).unwrap();
    let cyc = flexa_run(&p, &part, &ProxLinear, &SelectionRule::EssentiallyCyclic { period: 6 },
        Schedule::constant(0.7).unwrap(), &InexactPolicy::exact(), &x0, &cfg(60, 0.0, l)).unwrap();
    for (k, x) in gs.iterates.iter().enumerate() {
        assert!(dist2(x, &cyc.iterates[6 * k]) <= 1e-12);
    }
}

#[test]
fn one_block_per_worker_matches_jacobi_bitwise() {
    let p = generate_lasso(30, 20, 0.1, 4).unwrap();
    let part = BlockPartition::scalar(30).unwrap();
    let workers: Vec<Vec<usize>> = (0..30).map(|i| vec![i]).collect();
    let c = cfg(50, 0.0, p.tau_heuristic());
    let hybrid = flexa_parallel_cyclic(&p, &part, &LassoExact, &workers, Schedule::guarded_default(),
        &InexactPolicy::exact(), &[0.0; 30], &c).unwrap();
    let jacobi = flexa_run(&p, &part, &LassoExact, &SelectionRule::All, Schedule::guarded_default(),
        &InexactPolicy::exact(), &[0.0; 30], &c).unwrap();
    assert_eq!(hybrid.iterates, jacobi.iterates);
}

#[test]
fn hybrid_rejects_overlapping_workers() {
    let p = generate_lasso(4, 6, 0.5, 0).unwrap();
    let part = BlockPartition::scalar(4).unwrap();
    let r = flexa_parallel_cyclic(&p, &part, &LassoExact, &[vec![0, 1], vec![1, 2, 3]], Schedule::constant(1.0).unwrap(),
        &InexactPolicy::exact(), &[0.0; 4], &cfg(5, 0.0, 1.0));
    assert!(matches!(r, Err(sca_core::Error::Config(_))));
}

#[test]
fn greedy_cyclic_touches_the_largest_error() {
    let p = generate_logistic(40, 12, 0.05, 9).unwrap();
    let part = BlockPartition::scalar(12).unwrap();
    let workers: Vec<Vec<usize>> = vec![(0..4).collect(), (4..8).collect(), (8..12).collect()];
    let c = FlexaConfig { max_iters: 300, stop_tol: 1e-9, tau: TauPolicy::adaptive(p.tau_heuristic()), ..FlexaConfig::default() };
    let run = flexa_parallel_greedy_cyclic(&p, &part, &LogisticNewton, &workers, 0.5, ErrorBound::Displacement,
        Schedule::guarded(0.9, 1e-4).unwrap(), &InexactPolicy::exact(), &[0.0; 12], &c).unwrap();
    assert!(run.trace.iter().skip(1).all(|r| r.selected >= 1));
    assert!(p.merit(&run.x) <= 1e-3 * p.merit(&[0.0; 12]));
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let lasso = generate_lasso(200, 100, 0.05, 1).unwrap();
    let logit = generate_logistic(80, 40, 0.01, 2).unwrap();
    let rule = SelectionRule::RandomGreedy { sampling: Sampling::Nice { tau: 50 }, rho: 0.5, bound: ErrorBound::Displacement };
    let mut reference = None;
    for workers in [1, 2, 8] {
        let c = FlexaConfig { max_iters: 40, stop_tol: 0.0, tau: TauPolicy::adaptive(lasso.tau_heuristic()),
            v_star: lasso.v_star, workers, seed: 3, ..FlexaConfig::default() };
        let a = flexa_run(&lasso, &BlockPartition::scalar(200).unwrap(), &LassoExact, &rule, Schedule::guarded_default(),
            &InexactPolicy::exact(), &[0.0; 200], &c).unwrap();
        let c = FlexaConfig { max_iters: 40, stop_tol: 0.0, tau: TauPolicy::adaptive(logit.tau_heuristic()), workers, ..FlexaConfig::default() };
        let b = flexa_run(&logit, &BlockPartition::scalar(40).unwrap(), &LogisticNewton, &SelectionRule::All,
            Schedule::guarded_default(), &InexactPolicy::exact(), &[0.0; 40], &c).unwrap();
        let key = (a.x.clone(), a.trace.clone(), b.x.clone(), b.trace.clone());
        match &reference {
            None => reference = Some(key),
            Some(r) => {
                assert_eq!(r.0, key.0);
                assert_eq!(r.2, key.2);
                for (u, v) in r.1.iter().zip(&key.1).chain(r.3.iter().zip(&key.3)) {
                    assert_eq!(u.merit.objective.to_bits(), v.merit.objective.to_bits());
                }
            }
        }
    }
}

#[test]
fn random_greedy_limits() {
    let p = generate_lasso(40, 30, 0.1, 6).unwrap();
    let part = BlockPartition::scalar(40).unwrap();
    let c = FlexaConfig { max_iters: 30, stop_tol: 0.0, tau: TauPolicy::Uniform(1.0), seed: 8, ..FlexaConfig::default() };
    let sched = || Schedule::constant(0.9).unwrap();
    let ex = InexactPolicy::exact();

    let full = flexa_random_greedy(&p, &part, &LassoExact, Sampling::FullyParallel, 0.3, sched(), &ex, &[0.0; 40], &c).unwrap();
    let greedy = flexa_run(&p, &part, &LassoExact, &SelectionRule::Greedy { rho: 0.3, bound: ErrorBound::Displacement },
        sched(), &ex, &[0.0; 40], &c).unwrap();
    assert_eq!(full.x, greedy.x);

    let tiny = flexa_random_greedy(&p, &part, &LassoExact, Sampling::Nice { tau: 7 }, 1e-300, sched(), &ex, &[0.0; 40], &c).unwrap();
    let random = flexa_run(&p, &part, &LassoExact, &SelectionRule::Random(Sampling::Nice { tau: 7 }), sched(), &ex, &[0.0; 40], &c).unwrap();
    assert_eq!(tiny.x, random.x);
}

#[test]
fn armijo_descent_is_monotone_with_positive_constant() {
    let p = generate_lasso(30, 20, 0.1, 12).unwrap();
    let part = BlockPartition::scalar(30).unwrap();
    let c = FlexaConfig { max_iters: 200, stop_tol: 1e-10, tau: TauPolicy::Uniform(0.2), seed: 4, ..FlexaConfig::default() };
    for rule in [SelectionRule::All, SelectionRule::Random(Sampling::Nice { tau: 1 })] {
        let run = flexa_run(&p, &part, &LassoExact, &rule, Schedule::armijo_default(1.0).unwrap(),
            &InexactPolicy::exact(), &[0.0; 30], &c).unwrap();
        let mut beta = f64::INFINITY;
        for w in run.trace.windows(2) {
            let drop = w[0].merit.objective - w[1].merit.objective;
            assert!(drop >= 0.0);
            let step = w[1].merit.iterate_delta / w[1].stepsize;
            if step > 1e-5 {
                beta = beta.min(drop / (step * step));
            }
        }
        assert!(beta > 0.0 && beta.is_finite());
    }
}

#[test]
fn adaptive_tau_discards_increasing_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = DMatrix::from_fn(20, 10, |i, _| u[i] + 0.1 * rng.gen_range(-1.0..1.0));
    let z: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = Lasso::new(a, z, 0.1).unwrap();
    let c = FlexaConfig { max_iters: 300, stop_tol: 1e-10, tau: TauPolicy::adaptive(1e-3), record_iterates: true, ..FlexaConfig::default() };
    let run = flexa_run(&p, &BlockPartition::scalar(10).unwrap(), &LassoExact, &SelectionRule::All,
        Schedule::guarded_default(), &InexactPolicy::exact(), &[0.0; 10], &c).unwrap();
    assert!(run.tau_changes > 0 && run.tau_changes <= 100);
    assert!(run.trace.iter().any(|r| !r.accepted));
    for (w, x) in run.trace.windows(2).zip(run.iterates.windows(2)) {
        assert!(w[1].merit.objective <= w[0].merit.objective);
        if !w[1].accepted {
            assert_eq!(x[0], x[1]);
            assert_eq!(w[1].tau_scale, 2.0 * w[0].tau_scale);
        }
    }
    assert!(run.objective() < run.trace[0].merit.objective);
}

#[test]
fn nonseparable_g_caps_the_step() {
    let p = Coupled { c: vec![1.0, -2.0, 0.5, 3.0], lambda: 0.5 };
    let run = flexa_run(&p, &BlockPartition::scalar(4).unwrap(), &ProxLinear, &SelectionRule::All,
        Schedule::constant(1.0).unwrap(), &InexactPolicy::exact(), &[0.0; 4], &cfg(10, 0.0, 1.0)).unwrap();
    assert!(run.trace.iter().skip(1).all(|r| r.stepsize <= 0.25));
}

#[test]
fn invalid_configurations_are_rejected() {
    let p = generate_lasso(4, 6, 0.5, 0).unwrap();
    let part = BlockPartition::scalar(4).unwrap();
    let ex = InexactPolicy::exact();
    let s = || Schedule::constant(1.0).unwrap();
    let bad = |rule: SelectionRule| flexa_run(&p, &part, &LassoExact, &rule, s(), &ex, &[0.0; 4], &cfg(5, 0.0, 1.0)).is_err();
    assert!(bad(SelectionRule::Greedy { rho: 0.0, bound: ErrorBound::Displacement }));
    assert!(bad(SelectionRule::EssentiallyCyclic { period: 5 }));
    assert!(bad(SelectionRule::Random(Sampling::Nice { tau: 0 })));
    assert!(Schedule::constant(1.5).is_err());
    let c = FlexaConfig { tau: TauPolicy::Uniform(-1.0), ..cfg(5, 0.0, 1.0) };
    assert!(flexa_run(&p, &part, &LassoExact, &SelectionRule::All, s(), &ex, &[0.0; 4], &c).is_err());
    assert!(flexa_parallel_cyclic(&p, &part, &LassoExact, &[vec![0, 1, 2, 3]], Schedule::armijo_default(1.0).unwrap(),
        &ex, &[0.0; 4], &cfg(5, 0.0, 1.0)).is_err());
}

#[test]
fn inexact_solves_converge() {
    let p = generate_lasso(20, 15, 0.1, 21).unwrap();
    let geometric = InexactPolicy { epsilon: Some(Arc::new(|k| 0.5f64.powi(k as i32))), descent_check: true };
    let c = FlexaConfig { max_iters: 3000, stop_tol: 1e-9, tau: TauPolicy::Uniform(p.lipschitz()), ..FlexaConfig::default() };
    let run = flexa_run(&p, &BlockPartition::scalar(20).unwrap(), &ProxLinear, &SelectionRule::All,
        Schedule::constant(1.0).unwrap(), &geometric, &[0.0; 20], &c).unwrap();
    assert_eq!(run.stop, FlexaStop::Stationary);
    assert!(prox_gradient_residual(&p, &run.x) <= 1e-6);
}

proptest! {
    #[test]
    fn inexact_points_keep_sufficient_descent(seed in 0u64..200, eps in 0.0f64..1.0) {
        let p = generate_lasso(6, 8, 0.3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tau = 0.5;
        for i in 0..6 {
            let xhat = best_response_prox_linear(&p, i..i + 1, &x, tau).unwrap();
            let z = sca_core::flexa::engine::inexact_point(&p, &ProxLinear, &x, i..i + 1, tau, &xhat, eps, true).unwrap();
            let mut g = [0.0];
            p.block_grad_f(&x, i..i + 1, &mut g);
            let d = z[0] - x[i];
            let lhs = g[0] * d + p.eval_g_block(i..i + 1, &z) - p.eval_g_block(i..i + 1, &x[i..i + 1]);
            prop_assert!(lhs <= -0.5 * tau * d * d + 1e-12);
            prop_assert!((z[0] - xhat[0]).abs() <= eps + 1e-15);
        }
    }

    #[test]
    fn prox_linear_best_response_is_lipschitz(seed in 0u64..200) {
        let p = generate_lasso(6, 8, 0.3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let tau = 0.7;
        let map = |x: &[f64]| -> Vec<f64> {
            (0..6).map(|i| best_response_prox_linear(&p, i..i + 1, x, tau).unwrap()[0]).collect()
        };
        let ratio = dist2(&map(&a), &map(&b)) / dist2(&a, &b);
        prop_assert!(ratio <= (p.lipschitz() + tau) / tau + 1e-12);
    }

    #[test]
    fn greedy_set_contains_an_argmax(e in proptest::collection::vec(0.0f64..10.0, 1..20), rho in 0.01f64..1.0) {
        let pool: Vec<usize> = (0..e.len()).collect();
        let s = greedy_select(&pool, &e, rho).unwrap();
        let max = e.iter().copied().fold(0.0, f64::max);
        prop_assert!(s.iter().any(|&i| e[i] == max));
        prop_assert!(s.iter().all(|&i| e[i] >= rho * max));
    }

    #[test]
    fn surrogate_gradient_matches_block_gradient(seed in 0u64..100) {
        let p = generate_logistic(20, 6, 0.1, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..6 {
            let mut g = [0.0];
            let mut s = [0.0];
            p.block_grad_f(&y, i..i + 1, &mut g);
            LogisticNewton.gradient(&p, &y, i..i + 1, 0.3, &y[i..i + 1], &mut s);
            prop_assert!((g[0] - s[0]).abs() <= 1e-10 * (1.0 + g[0].abs()));
            let lasso = generate_lasso(6, 8, 0.3, seed).unwrap();
            lasso.block_grad_f(&y, i..i + 1, &mut g);
            LassoExact.gradient(&lasso, &y, i..i + 1, 0.3, &y[i..i + 1], &mut s);
            prop_assert!((g[0] - s[0]).abs() <= 1e-10 * (1.0 + g[0].abs()));
        }
    }

    #[test]
    fn surrogates_are_strongly_convex(seed in 0u64..100, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = generate_logistic(20, 6, 0.1, seed).unwrap();
        let y: Vec<f64> = vec![0.1; 6];
        let tau = 0.3;
        let va = LogisticNewton.value(&p, &y, 2..3, tau, &[a]);
        let vb = LogisticNewton.value(&p, &y, 2..3, tau, &[b]);
        let mut gb = [0.0];
        LogisticNewton.gradient(&p, &y, 2..3, tau, &[b], &mut gb);
        prop_assert!(va >= vb + gb[0] * (a - b) + 0.5 * tau * (a - b) * (a - b) - 1e-10);
    }
}
