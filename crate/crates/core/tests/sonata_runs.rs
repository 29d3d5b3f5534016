use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::base::diagnostics::fd_gradient;
use sca_core::base::problem::CompositeProblem;
use sca_core::base::schedule::Schedule;
use sca_core::exec::Executor;
use sca_core::network::*;
use sca_core::problems::*;
use sca_core::sonata::*;

fn random_points(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Sum of several quadratics, used as the shared problem.
struct Sum<'a>(&'a [Quadratic]);

impl CompositeProblem for Sum<'_> {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|q| q.eval_f(x)).sum()
    }

    fn grad_f(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; x.len()];
        for q in self.0 {
            q.grad_f(x, &mut g);
            out.iter_mut().zip(&g).for_each(|(o, v)| *o += v);
        }
    }
}

fn quadratics(n: usize, m: usize, seed: u64) -> Vec<Quadratic> {
    (0..n).map(|i| random_spd_quadratic(m, 0.5, seed + i as u64).unwrap()).collect()
}

fn static_doubly(n: usize) -> (GraphSequence, WeightMatrix) {
    let g = GraphStep::ring(n).unwrap().symmetrized();
    let w = build_weights(&g, WeightRule::Metropolis).unwrap();
    (GraphSequence::fixed(g).unwrap(), w)
}

fn mat_apply(w: &WeightMatrix, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    consensus_step(x, w).unwrap()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grads(qs: &[Quadratic], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    qs.iter()
        .zip(x)
        .map(|(q, xi)| {
            let mut g = vec![0.0; xi.len()];
            q.grad_f(xi, &mut g);
            g
        })
        .collect()
}

fn special_case(x_mode: Combine, y_mode: Combine) -> f64 {
    let (n, m, gamma) = (6, 4, 0.05);
    let qs = quadratics(n, m, 40);
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, n as f64).unwrap()).collect();
    let (graph, w) = static_doubly(n);
    let mut cfg = SonataConfig::new(Schedule::constant(gamma).unwrap(), graph, 100, 0.0);
    cfg.rule = WeightRule::Metropolis;
    cfg.variant = SonataVariant { x: x_mode, y: y_mode };
    cfg.record_iterates = true;
    let x0 = random_points(n, m, 41);
    let run = sonata_run(&agents, &Sum(&qs), &cfg, x0.clone()).unwrap();

    let mut x = x0;
    let mut g = grads(&qs, &x);
    let mut y = g.clone();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let x_next = match x_mode {
            Combine::Atc => {
                let v: Vec<Vec<f64>> = x.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - gamma * q).collect()).collect();
                mat_apply(&w, &v)
            }
            Combine::Caa => {
                let wx = mat_apply(&w, &x);
                wx.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - gamma * q).collect()).collect()
            }
        };
        let g_next = grads(&qs, &x_next);
        let diff: Vec<Vec<f64>> = g_next.iter().zip(&g).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect()).collect();
        y = match y_mode {
            Combine::Atc => {
                let v: Vec<Vec<f64>> = y.iter().zip(&diff).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect();
                mat_apply(&w, &v)
            }
            Combine::Caa => {
                let wy = mat_apply(&w, &y);
                wy.iter().zip(&diff).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect()
            }
        };
        x = x_next;
        g = g_next;
        worst = worst.max(max_gap(&run.iterates[k + 1], &x));
    }
    worst
}

#[test]
fn linearized_atc_is_aug_dgm() {
    assert!(special_case(Combine::Atc, Combine::Atc) <= 1e-12);
}

#[test]
fn linearized_caa_is_diging() {
    assert!(special_case(Combine::Caa, Combine::Caa) <= 1e-12);
}

#[test]
fn tracking_identity_holds_for_every_variant() {
    let inst = generate_huber(5, 6, 8, 0.1, 3).unwrap();
    for x in [Combine::Atc, Combine::Caa] {
        for y in [Combine::Atc, Combine::Caa] {
            let agents: Vec<_> = inst
                .agents
                .iter()
                .map(|a| HuberAgentProblem { agent: a, alpha: inst.alpha, variant: HuberSurrogate::Linear, tau: 2.0 })
                .collect();
            let mut cfg =
                SonataConfig::new(Schedule::recursive(0.1, 0.01).unwrap(), GraphSequence::permuted_ring_plus_random(5, 4).unwrap(), 200, 0.0);
            cfg.variant = SonataVariant { x, y };
            let run = sonata_run(&agents, &inst, &cfg, random_points(5, 6, 5)).unwrap();
            assert!(run.trace.iter().all(|r| r.tracking_drift <= 1e-10));
            assert!((run.state.phi.iter().sum::<f64>() - 5.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn linear_costs_keep_the_invariant_exact() {
    let n = 5;
    let qs: Vec<Quadratic> = random_points(n, 3, 7).into_iter().map(|b| Quadratic::new(DMatrix::zeros(3, 3), b).unwrap()).collect();
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, 1.0).unwrap()).collect();
    let cfg = SonataConfig::new(Schedule::constant(0.01).unwrap(), GraphSequence::permuted_ring_plus_random(n, 8).unwrap(), 50, 0.0);
    let run = sonata_run(&agents, &Sum(&qs), &cfg, random_points(n, 3, 9)).unwrap();
    assert!(run.trace.iter().all(|r| r.tracking_drift <= 1e-12));
}

#[test]
fn identical_agents_stay_consensual() {
    let n = 4;
    let q = random_spd_quadratic(3, 1.0, 11).unwrap();
    let qs = vec![q.clone(); n];
    let tau = 8.0;
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, tau).unwrap()).collect();
    let graph = GraphSequence::permuted_ring_plus_random(n, 2).unwrap().undirected();
    let mut cfg = SonataConfig::new(Schedule::recursive(0.5, 0.01).unwrap(), graph, 60, 0.0);
    cfg.rule = WeightRule::Metropolis;
    let start = vec![0.3, -0.2, 0.9];
    let run = sonata_run(&agents, &Sum(&qs), &cfg, vec![start.clone(); n]).unwrap();
    let mut x = start;
    let mut s = Schedule::recursive(0.5, 0.01).unwrap();
    let mut g = vec![0.0; 3];
    for _ in 0..60 {
        q.grad_f(&x, &mut g);
        let gamma = s.current();
        x = x.iter().zip(&g).map(|(a, b)| a - gamma * n as f64 * b / tau).collect();
        s.next_stepsize();
    }
    let worst = run.trace.iter().map(|r| r.d).fold(0.0, f64::max);
    assert!(worst <= 1e-14, "{worst}");
    assert!(run.x_bar().iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-13));
}

#[test]
fn seeded_at_the_solution_the_run_is_constant() {
    let n = 3;
    let qs = quadratics(n, 3, 13);
    let total = Sum(&qs);
    let mut q = DMatrix::zeros(3, 3);
    let mut b = vec![0.0; 3];
    for qi in &qs {
        q += &qi.q;
        b.iter_mut().zip(&qi.b).for_each(|(o, v)| *o -= v);
    }
    let xs = q.lu().solve(&DVector::from_vec(b)).unwrap();
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, 3.0).unwrap()).collect();
    let mut cfg = SonataConfig::new(Schedule::constant(0.5).unwrap(), GraphSequence::permuted_ring_plus_random(n, 1).unwrap(), 30, 0.0);
    cfg.record_iterates = true;
    let x0 = vec![xs.as_slice().to_vec(); n];
    let mut state = SonataState::new(&agents, x0.clone()).unwrap();
    let mut g = vec![0.0; 3];
    total.grad_f(&x0[0], &mut g);
    state.y = vec![g.iter().map(|v| v / n as f64).collect(); n];
    assert!(g.iter().all(|v| v.abs() < 1e-12));
    let run = sonata_run_from(&agents, &total, &cfg, state).unwrap();
    assert_eq!(run.iterates.len(), 31);
    assert!(run.iterates.iter().all(|x| max_gap(x, &x0) <= 1e-12));
}

#[test]
fn atc_keeps_agents_in_the_box() {
    let inst = generate_localization(6, 2, 2, 0.7, 0.0, 3).unwrap().with_box(vec![0.2, 0.2], vec![0.6, 0.6]).unwrap();
    let agents: Vec<_> =
        (0..6).map(|i| LocalizationAgent { instance: &inst, sensor: i, variant: LocalizationSurrogate::PartialConvex, tau: 5.0 }).collect();
    let mut cfg = SonataConfig::new(Schedule::recursive(0.5, 0.01).unwrap(), GraphSequence::permuted_ring_plus_random(6, 3).unwrap(), 200, 0.0);
    cfg.record_iterates = true;
    let run = sonata_run(&agents, &inst, &cfg, vec![vec![0.4; 4]; 6]).unwrap();
    for x in run.iterates.iter().flatten() {
        assert!(x.iter().all(|v| (0.2..=0.6).contains(v)));
    }
}

#[test]
fn huber_quadratic_step_matches_a_dense_solve() {
    let inst = generate_huber(4, 5, 7, 0.1, 17).unwrap();
    let a = &inst.agents[1];
    let (tau, n) = (1.5, 4);
    let agent = HuberAgentProblem { agent: a, alpha: inst.alpha, variant: HuberSurrogate::Quadratic, tau };
    let pts = random_points(3, 5, 18);
    let (xk, y) = (&pts[0], &pts[1]);
    let mut g = vec![0.0; 5];
    agent.gradient(xk, &mut g);
    let (xt, _) = sonata_local_step(&agent, xk, y, &g, n, 1.0).unwrap();

    let r = a.residual(xk);
    let dk = DMatrix::from_diagonal(&DVector::from_iterator(r.len(), r.iter().map(|v| (inst.alpha / v.abs()).min(1.0))));
    let bm = &a.b;
    let lhs = DMatrix::identity(5, 5) * tau + bm.transpose() * &dk * bm * 2.0;
    let dv = DVector::from_column_slice(&a.d);
    let rhs = DVector::from_column_slice(xk) * tau - (DVector::from_column_slice(y) * n as f64 - DVector::from_column_slice(&g))
        + bm.transpose() * &dk * dv * 2.0;
    let oracle = lhs.lu().solve(&rhs).unwrap();
    assert!(xt.iter().zip(oracle.iter()).all(|(p, q)| (p - q).abs() <= 1e-10));
}

#[test]
fn agent_surrogates_are_gradient_consistent() {
    let hub = generate_huber(2, 4, 6, 0.1, 21).unwrap();
    let loc = generate_localization(4, 2, 2, 0.8, 0.0, 22).unwrap();
    let q = random_spd_quadratic(4, 0.3, 23).unwrap();
    let mut list: Vec<Box<dyn AgentProblem>> = Vec::new();
    for variant in [HuberSurrogate::Linear, HuberSurrogate::Quadratic] {
        list.push(Box::new(HuberAgentProblem { agent: &hub.agents[0], alpha: hub.alpha, variant, tau: 1.5 }));
    }
    for variant in [LocalizationSurrogate::Linear, LocalizationSurrogate::PartialConvex] {
        list.push(Box::new(LocalizationAgent { instance: &loc, sensor: 1, variant, tau: 5.0 }));
    }
    list.push(Box::new(Linearized::new(&q, 2.0).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for agent in &list {
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; 4];
            agent.gradient(&x, &mut g);
            let mut sg = vec![0.0; 4];
            agent.surrogate_gradient(&x, &x, &mut sg);
            let fd = fd_gradient(|z| agent.value(z), &x, 1e-6);
            let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for c in 0..4 {
                assert!((g[c] - sg[c]).abs() <= 1e-12 * scale);
                assert!((g[c] - fd[c]).abs() <= 1e-5 * scale);
            }
        }
    }
}

#[test]
fn huber_run_converges_and_windowed_merit_decreases() {
    let inst = generate_huber(10, 20, 10, 0.1, 1).unwrap();
    let agents: Vec<_> = inst
        .agents
        .iter()
        .map(|a| HuberAgentProblem { agent: a, alpha: inst.alpha, variant: HuberSurrogate::Linear, tau: 2.0 })
        .collect();
    let cfg = SonataConfig::new(Schedule::recursive(0.1, 0.01).unwrap(), GraphSequence::permuted_ring_plus_random(10, 3).unwrap(), 1000, 0.0);
    let run = sonata_run(&agents, &inst, &cfg, vec![vec![0.0; 20]; 10]).unwrap();
    let last = run.last();
    assert!(last.j <= 1e-4 && last.d <= 1e-8);
    assert_eq!(last.messages, 2000);
    let mins: Vec<f64> = run.trace.chunks(50).map(|w| w.iter().map(|r| r.m).fold(f64::INFINITY, f64::min)).collect();
    let floor = 1e-24;
    assert!(mins.windows(2).all(|p| p[1] <= p[0] || p[1] <= floor));
}

#[test]
fn runs_are_identical_for_any_worker_count() {
    let inst = generate_huber(6, 8, 6, 0.1, 2).unwrap();
    let agents: Vec<_> = inst
        .agents
        .iter()
        .map(|a| HuberAgentProblem { agent: a, alpha: inst.alpha, variant: HuberSurrogate::Quadratic, tau: 1.5 })
        .collect();
    let mut base = None;
    for workers in [1, 2, 8] {
        let mut cfg = SonataConfig::new(Schedule::recursive(0.1, 0.01).unwrap(), GraphSequence::permuted_ring_plus_random(6, 1).unwrap(), 100, 0.0);
        cfg.workers = workers;
        let run = sonata_run(&agents, &inst, &cfg, random_points(6, 8, 3)).unwrap();
        let sig: Vec<(u64, u64)> = run.trace.iter().map(|r| (r.j.to_bits(), r.d.to_bits())).collect();
        match &base {
            None => base = Some((sig, run.state)),
            Some((s, st)) => {
                assert_eq!(&sig, s);
                assert_eq!(&run.state, st);
            }
        }
    }
}

#[test]
fn communicate_rejects_row_stochastic_weights() {
    let qs = quadratics(2, 2, 1);
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, 2.0).unwrap()).collect();
    let s = SonataState::new(&agents, random_points(2, 2, 2)).unwrap();
    let w = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]), Stochasticity::Row).unwrap();
    let half = s.x.clone();
    assert!(sonata_communicate(&s, &w, &half, &agents, SonataVariant::default(), &Executor::sequential()).is_err());
}

proptest! {
    #[test]
    fn doubly_stochastic_weights_keep_phi_at_one(seed in 0u64..500) {
        let n = 5;
        let qs = quadratics(n, 3, seed);
        let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, 5.0).unwrap()).collect();
        let g = GraphSequence::permuted_ring_plus_random(n, seed).unwrap().undirected();
        let mut cfg = SonataConfig::new(Schedule::constant(0.2).unwrap(), g, 10, 0.0);
        cfg.rule = WeightRule::Metropolis;
        let run = sonata_run(&agents, &Sum(&qs), &cfg, random_points(n, 3, seed + 1)).unwrap();
        prop_assert!(run.state.phi.iter().all(|p| (p - 1.0).abs() <= 1e-15));
    }
}
