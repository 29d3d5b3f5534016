//! The acceptance battery.
//!
//! Twelve criteria, each reported as one line. Criteria marked as recorded are printed but never
//! decide the overall verdict.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_core::base::diagnostics::{fd_gradient, relative_gap};
use sca_core::base::{BlockPartition, CompositeProblem, Schedule};
use sca_core::flexa::{flexa_run, ErrorBound, FlexaConfig, FlexaStop, InexactPolicy, ProxLinear, SelectionRule, SurrogateFamily, TauPolicy};
use sca_core::linalg::dist2;
use sca_core::mm::dictionary::{dictionary_learning_mm, DConstraint, DUpdate, DictConfig};
use sca_core::mm::matcomp::{singular_value_threshold, svt_objective};
use sca_core::mm::sparse_ls::SparseLs;
use sca_core::mm::{matcomp_block_mm, nnls_mm, sparse_ls_mm, MatCompState, MmConfig, NnlsVariant, SparseLsVariant};
use sca_core::network::{
    build_weights, consensus_step, log_linear_fit, perturbed_push_sum_run, phi_bounds, tracking_step, weighted_sum,
    GraphSequence, GraphStep, PushSumState, WeightMatrix, WeightRule,
};
use sca_core::penalties::DcPenalty;
use sca_core::problems::{
    generate_huber, generate_lasso, generate_localization, generate_logistic, random_spd_quadratic, HuberInstance,
    HuberSurrogate, Lasso, LassoExact, LocalizationInstance, LocalizationSurrogate, LogisticNewton, Quadratic,
};
use sca_core::sonata::{
    sonata_local_step, sonata_run, AgentProblem, Combine, HuberAgentProblem, Linearized, LocalizationAgent, SonataConfig,
    SonataResult, SonataVariant,
};

use crate::config::RunConfig;
use crate::error::Result;
use crate::experiment::{self, generate_least_squares};
use crate::oracle::{oracle_gridmin, oracle_proxgrad};

pub const CRITERIA: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    /// False for criteria that are recorded only.
    pub gating: bool,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.gating, self.pass) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "PASS (recorded)",
            (false, false) => "FAIL (recorded)",
        };
        write!(f, "criterion {:>2} {status}: {} [{}] ({:.2} s)", self.id, self.title, self.detail, self.seconds)
    }
}

/// Pass/fail items of one criterion.
#[derive(Debug, Default)]
struct Checks {
    failed: bool,
    parts: Vec<String>,
}

impl Checks {
    fn le(&mut self, what: impl fmt::Display, value: f64, bound: f64) {
        let ok = value <= bound;
        self.failed |= !ok;
        self.parts.push(format!("{what} {value:.3e} {} {bound:e}", if ok { "<=" } else { "!<=" }));
    }

    fn require(&mut self, what: impl fmt::Display, ok: bool) {
        self.failed |= !ok;
        self.parts.push(format!("{what}: {}", if ok { "yes" } else { "no" }));
    }

    /// A non-gating observation.
    fn note(&mut self, what: impl fmt::Display) {
        self.parts.push(what.to_string());
    }
}

type Body = fn() -> Result<Checks>;

struct Spec {
    title: &'static str,
    gating: bool,
    budget: Option<f64>,
    body: Body,
}

fn spec(id: usize) -> Spec {
    let (title, gating, budget, body): (&'static str, bool, Option<f64>, Body) = match id {
        1 => ("MM descent chain", true, Some(10.0), c01_mm_chain),
        2 => ("majorizer suite", true, None, c02_majorizers),
        3 => ("surrogate gradient consistency", true, None, c03_gradients),
        4 => ("closed forms against oracles", true, None, c04_closed_forms),
        5 => ("FLEXA on the certificate LASSO", true, None, c05_flexa),
        6 => ("FLEXA determinism across workers", true, None, c06_determinism),
        7 => ("consensus layer", true, Some(5.0), c07_consensus),
        8 => ("gradient tracking", true, None, c08_tracking),
        9 => ("SONATA Huber regression", true, Some(60.0), c09_sonata_huber),
        10 => ("special-case equivalence", true, None, c10_special_cases),
        11 => ("empirical rate", false, None, c11_rate),
        12 => ("target localization", true, Some(30.0), c12_localization),
        _ => panic!("criterion {id} does not exist"),
    };
    Spec { title, gating, budget, body }
}

/// Run one criterion; `id` ranges over `1..=CRITERIA`.
pub fn run_criterion(id: usize) -> Outcome {
    let s = spec(id);
    let start = Instant::now();
    let result = (s.body)();
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match result {
        Ok(c) => (!c.failed, c.parts.join("; ")),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = s.budget {
        if seconds > b {
            pass = false;
            detail.push_str(&format!("; runtime {seconds:.2} s exceeds {b} s"));
        }
    }
    Outcome { id, title: s.title, gating: s.gating, pass, detail, seconds }
}

pub fn run_all() -> Vec<Outcome> {
    (1..=CRITERIA).map(run_criterion).collect()
}

pub fn gating_passed(outcomes: &[Outcome]) -> bool {
    outcomes.iter().all(|o| o.pass || !o.gating)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn points(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| uniform(&mut r, m, -1.0, 1.0)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn penalty_catalogue() -> Result<Vec<DcPenalty>> {
    Ok(vec![
        DcPenalty::exp(2.0)?,
        DcPenalty::log(2.0)?,
        DcPenalty::lp_plus(2.0, 0.5)?,
        DcPenalty::lp_minus(2.0, -1.0)?,
        DcPenalty::scad_default(1.0)?,
    ])
}

fn c01_mm_chain() -> Result<Checks> {
    let mut c = Checks::default();
    let cfg = MmConfig { max_iters: 300, record_iterates: false, ..MmConfig::default() };
    let mut worst: f64 = 0.0;
    let mut runs = 0;

    let (a, z, _) = generate_least_squares(30, 50, false, 101);
    for pen in penalty_catalogue()? {
        for v in [SparseLsVariant::DoubleLoop, SparseLsVariant::OneStep] {
            worst = worst.max(sparse_ls_mm(&a, &z, 0.05, pen, v, &[0.0; 50], &cfg)?.max_chain_violation());
            runs += 1;
        }
    }
    let (a, z, _) = generate_least_squares(30, 10, true, 102);
    for v in [NnlsVariant::GradProj, NnlsVariant::Multiplicative] {
        worst = worst.max(nnls_mm(&a, &z, v, &[1.0; 10], &cfg)?.max_chain_violation());
        runs += 1;
    }

    let mut r = rng(103);
    let u = DMatrix::from_fn(6, 2, |_, _| r.gen_range(-1.0..1.0));
    let v = DMatrix::from_fn(2, 5, |_, _| r.gen_range(-1.0..1.0));
    let mut y = &u * &v;
    y[(2, 3)] += 4.0;
    for (mask_p, pen) in [(1.0, DcPenalty::log(2.0)?), (0.7, DcPenalty::exp(1.5)?)] {
        let st = MatCompState {
            mask: DMatrix::from_fn(6, 5, |_, _| r.gen_bool(mask_p)),
            y: y.clone(),
            l: DMatrix::zeros(6, 5),
            s: DMatrix::zeros(6, 5),
            lambda_r: 1.0,
            lambda_s: 0.5,
            g_r: pen,
            g_s: pen,
        };
        worst = worst.max(matcomp_block_mm(st, &cfg)?.max_chain_violation());
        runs += 1;
    }

    let y = DMatrix::from_fn(6, 15, |_, _| r.gen_range(-1.0..1.0));
    for (constraint, d_update) in [
        (DConstraint::FrobeniusBall(3.0), DUpdate::Bisection),
        (DConstraint::FrobeniusBall(3.0), DUpdate::ProjectedStep),
        (DConstraint::PerColumnBall(vec![1.0; 3]), DUpdate::ProjectedStep),
        (DConstraint::Nonneg, DUpdate::ProjectedStep),
    ] {
        let dc = DictConfig {
            rank: 3,
            lambda_s: 0.2,
            penalty: DcPenalty::exp(2.0)?,
            constraint,
            d_update,
            x_steps: 1,
            mm: MmConfig { max_iters: 200, ..cfg },
        };
        worst = worst.max(dictionary_learning_mm(&y, &dc)?.max_chain_violation());
        runs += 1;
    }
    c.le(format!("worst chain violation over {runs} runs"), worst, 1e-10);
    Ok(c)
}

type Majorizer = Box<dyn Fn(f64, f64) -> Result<f64>>;

fn c02_majorizers() -> Result<Checks> {
    let mut c = Checks::default();
    let mut r = rng(201);
    let mut below: f64 = 0.0;
    let mut touch: f64 = 0.0;
    let mut families = 0;
    for pen in penalty_catalogue()? {
        let mut majorizers: Vec<Majorizer> = vec![Box::new(move |x, y| Ok(pen.majorize_dc(x, y)))];
        if pen.adhoc_weight(1.0).is_ok() {
            majorizers.push(Box::new(move |x, y| Ok(pen.majorize_concave_adhoc(x, y)?)));
        }
        for maj in &majorizers {
            families += 1;
            for _ in 0..1000 {
                let (x, y) = (r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
                below = below.max(pen.value(x) - maj(x, y)?);
                touch = touch.max((maj(y, y)? - pen.value(y)).abs());
            }
        }
    }
    c.le(format!("worst g - g~ over {families} majorizers"), below, 1e-12);
    c.le("worst |g~(y|y) - g(y)|", touch, 1e-12);
    Ok(c)
}

/// Gradient of the FLEXA block surrogate at the anchor against `∇ᵢF` and a finite difference.
fn flexa_gap<P: CompositeProblem, S: SurrogateFamily<P>>(p: &P, s: &S, blocks: &BlockPartition, x: &[f64], tau: f64) -> f64 {
    let mut g = vec![0.0; p.dim()];
    p.grad_f(x, &mut g);
    let mut worst: f64 = 0.0;
    for b in 0..blocks.len() {
        let range = blocks.range(b);
        let xi = &x[range.clone()];
        let fd = fd_gradient(|z| s.value(p, x, range.clone(), tau, z), xi, 1e-6);
        let mut sg = vec![0.0; xi.len()];
        s.gradient(p, x, range.clone(), tau, xi, &mut sg);
        worst = worst.max(relative_gap(&fd, &g[range.clone()])).max(relative_gap(&sg, &g[range]));
    }
    worst
}

fn c03_gradients() -> Result<Checks> {
    let mut c = Checks::default();
    let mut r = rng(301);
    let lasso = generate_lasso(20, 15, 0.2, 302)?;
    let logistic = generate_logistic(25, 12, 0.01, 303)?;
    let scalar20 = BlockPartition::scalar(20)?;
    let blocks20 = BlockPartition::uniform(4, 5)?;
    let scalar12 = BlockPartition::scalar(12)?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = uniform(&mut r, 20, -1.0, 1.0);
        worst = worst.max(flexa_gap(&lasso, &LassoExact, &scalar20, &x, 0.5));
        worst = worst.max(flexa_gap(&lasso, &ProxLinear, &blocks20, &x, 0.5));
        let w = uniform(&mut r, 12, -1.0, 1.0);
        worst = worst.max(flexa_gap(&logistic, &LogisticNewton, &scalar12, &w, 0.5));
        worst = worst.max(flexa_gap(&logistic, &ProxLinear, &scalar12, &w, 0.5));
    }
    c.le("FLEXA families, 100 points", worst, 1e-5);

    let huber = generate_huber(3, 6, 8, 0.1, 304)?;
    let loc = generate_localization(5, 2, 2, 0.8, 0.0, 305)?;
    let quad = random_spd_quadratic(6, 0.3, 306)?;
    let lin = Linearized::new(&quad, 2.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = uniform(&mut r, 6, -1.0, 1.0);
        let agent = &huber.agents[1];
        let mut g = vec![0.0; 6];
        agent.gradient(&x, huber.alpha, &mut g);
        for variant in [HuberSurrogate::Linear, HuberSurrogate::Quadratic] {
            let fd = fd_gradient(|z| agent.surrogate_value(z, &x, huber.alpha, variant, 1.5), &x, 1e-6);
            worst = worst.max(relative_gap(&fd, &g));
        }
        let xl = uniform(&mut r, 4, 0.0, 1.0);
        let mut gl = vec![0.0; 4];
        loc.agent_gradient(2, &xl, &mut gl);
        for variant in [LocalizationSurrogate::Linear, LocalizationSurrogate::PartialConvex] {
            let fd = fd_gradient(|z| loc.surrogate_value(2, z, &xl, variant, 5.0), &xl, 1e-6);
            worst = worst.max(relative_gap(&fd, &gl));
        }
        let mut gq = vec![0.0; 6];
        quad.grad_f(&x, &mut gq);
        let fq = quad.eval_f(&x);
        let fd = fd_gradient(
            |z| {
                let d: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
                fq + gq.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + 0.5 * lin.tau * d.iter().map(|v| v * v).sum::<f64>()
            },
            &x,
            1e-6,
        );
        let mut sg = vec![0.0; 6];
        lin.surrogate_gradient(&x, &x, &mut sg);
        worst = worst.max(relative_gap(&fd, &gq)).max(relative_gap(&sg, &gq));
    }
    c.le("SONATA families, 100 points", worst, 1e-5);
    Ok(c)
}

/// Derivative-free descent from `x0`: coordinate moves, then random directions so that kinks along
/// the coordinate axes cannot stall it. The step halves whenever no trial improves, down to `1e-10`.
fn pattern_search(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], mut step: f64, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut v = f(&x);
    let mut trial = vec![0.0; n];
    while step > 1e-10 {
        let mut improved = false;
        for t in 0..(2 * n + 200) {
            let dir: Vec<f64> = if t < 2 * n {
                let mut e = vec![0.0; n];
                e[t / 2] = if t % 2 == 0 { 1.0 } else { -1.0 };
                e
            } else {
                let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = d.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                d.into_iter().map(|a| a / norm).collect()
            };
            for ((t, a), d) in trial.iter_mut().zip(&x).zip(&dir) {
                *t = a + step * d;
            }
            let w = f(&trial);
            if w < v {
                v = w;
                x.copy_from_slice(&trial);
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, x)
}

/// `U diag(s) Vᵀ` with `U`, `V` given by ZYZ Euler angles `p[0..3]`, `p[3..6]` and `s = p[6..9]`.
fn svd_coordinates(p: &[f64]) -> DMatrix<f64> {
    let rot = |a: f64, b: f64, c: f64| {
        let rz = |t: f64| DMatrix::from_row_slice(3, 3, &[t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0]);
        let ry = DMatrix::from_row_slice(3, 3, &[b.cos(), 0.0, b.sin(), 0.0, 1.0, 0.0, -b.sin(), 0.0, b.cos()]);
        rz(a) * ry * rz(c)
    };
    let u = rot(p[0], p[1], p[2]);
    let v = rot(p[3], p[4], p[5]);
    u * DMatrix::from_diagonal(&DVector::from_column_slice(&p[6..9])) * v.transpose()
}

fn c04_closed_forms() -> Result<Checks> {
    let mut c = Checks::default();
    let mut r = rng(401);

    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (rows, cols) = (8, 5);
        let a = DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
        let z = uniform(&mut r, rows, -2.0, 2.0);
        let p = Lasso::new(a.clone(), z.clone(), r.gen_range(0.1..2.0))?;
        let x = uniform(&mut r, cols, -1.0, 1.0);
        let (i, tau) = (k % cols, r.gen_range(0.0..1.0));
        let closed = p.best_response_scalar(i, &x, &p.residual(&x), tau)?;
        let f = |u: &[f64]| {
            let mut y = x.clone();
            y[i] = u[0];
            let res: f64 = (0..rows).map(|j| (z[j] - (0..cols).map(|l| a[(j, l)] * y[l]).sum::<f64>()).powi(2)).sum();
            0.5 * res + 0.5 * tau * (u[0] - x[i]).powi(2) + p.lambda * u[0].abs()
        };
        let g = oracle_gridmin(f, &[-10.0], &[10.0], 1e-4)?;
        worst = worst.max((g.argmin[0] - closed).abs());
    }
    c.le("LASSO best response vs grid, 100 instances", worst, 2e-4);

    let mut worst: f64 = 0.0;
    let mm = MmConfig::default();
    for k in 0..100 {
        let (rows, cols) = (6, 4);
        let a = DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
        let z = uniform(&mut r, rows, -2.0, 2.0);
        let pen = penalty_catalogue()?[k % 5];
        let lambda = r.gen_range(0.1..1.0);
        let s = SparseLs::new(&a, &z, lambda, pen, SparseLsVariant::DoubleLoop, &mm)?;
        let x = uniform(&mut r, cols, -1.0, 1.0);
        let anchor = uniform(&mut r, cols, -1.0, 1.0);
        let closed = s.inner_step(&x, &anchor)?;
        let res: Vec<f64> = (0..rows).map(|j| (0..cols).map(|l| a[(j, l)] * x[l]).sum::<f64>() - z[j]).collect();
        let i = k % cols;
        let gi: f64 = (0..rows).map(|j| a[(j, i)] * res[j]).sum();
        let (l, eta, w) = (s.lipschitz, pen.eta(), pen.dg_minus(anchor[i]));
        let f = |u: &[f64]| {
            let d = u[0] - x[i];
            2.0 * gi * d + 0.5 * l * d * d + lambda * eta * u[0].abs() - lambda * w * u[0]
        };
        let g = oracle_gridmin(f, &[-10.0], &[10.0], 1e-4)?;
        worst = worst.max((g.argmin[0] - closed[i]).abs());
    }
    c.le("sparse-LS soft-threshold step vs grid, 100 instances", worst, 2e-4);

    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let xk = DMatrix::from_fn(3, 3, |_, _| r.gen_range(-2.0..2.0));
        let pen = penalty_catalogue()?[k % 5];
        let lambda_r = r.gen_range(0.1..1.0);
        let prev = DMatrix::from_fn(3, 3, |_, _| r.gen_range(-2.0..2.0));
        let w: Vec<f64> = sca_core::mm::matcomp::singular_values_desc(&prev).iter().map(|s| pen.dg_minus(*s)).collect();
        let closed = singular_value_threshold(&xk, lambda_r, pen.eta(), &w)?;
        let v_closed = svt_objective(&closed, &xk, lambda_r, pen.eta(), &w);
        let f = |v: &[f64]| svt_objective(&DMatrix::from_column_slice(3, 3, v), &xk, lambda_r, pen.eta(), &w);
        let g = |p: &[f64]| f(svd_coordinates(p).as_slice());
        let mut best = f64::INFINITY;
        let mut starts = vec![xk.as_slice().to_vec(), vec![0.0; 9]];
        starts.extend((0..4).map(|_| uniform(&mut r, 9, -2.0, 2.0)));
        for s in &starts {
            best = best.min(pattern_search(&f, s, 0.5, &mut r).0);
        }
        for _ in 0..6 {
            let mut p = uniform(&mut r, 6, -3.2, 3.2);
            p.extend(uniform(&mut r, 3, -2.0, 2.0));
            best = best.min(pattern_search(&g, &p, 0.5, &mut r).0);
        }
        worst = worst.max((v_closed - best).abs());
    }
    c.le("singular-value thresholding vs pattern search, 20 matrices", worst, 1e-6);

    let inst = generate_huber(4, 5, 7, 0.1, 402)?;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let a = &inst.agents[k % 4];
        let tau = r.gen_range(0.5..3.0);
        let agent = HuberAgentProblem { agent: a, alpha: inst.alpha, variant: HuberSurrogate::Quadratic, tau };
        let xk = uniform(&mut r, 5, -1.0, 1.0);
        let y = uniform(&mut r, 5, -1.0, 1.0);
        let mut g = vec![0.0; 5];
        agent.gradient(&xk, &mut g);
        let (xt, _) = sonata_local_step(&agent, &xk, &y, &g, 4, 1.0)?;
        let res = a.residual(&xk);
        let dk = DMatrix::from_diagonal(&DVector::from_iterator(res.len(), res.iter().map(|v| (inst.alpha / v.abs()).min(1.0))));
        let lhs = DMatrix::identity(5, 5) * tau + a.b.transpose() * &dk * &a.b * 2.0;
        let rhs = DVector::from_column_slice(&xk) * tau - (DVector::from_column_slice(&y) * 4.0 - DVector::from_column_slice(&g))
            + a.b.transpose() * &dk * DVector::from_column_slice(&a.d) * 2.0;
        let Some(oracle) = lhs.lu().solve(&rhs) else {
            c.require("dense solve succeeded", false);
            return Ok(c);
        };
        worst = worst.max(max_abs_diff(&xt, oracle.as_slice()));
    }
    c.le("Huber quadratic step vs dense solve, 20 instances", worst, 1e-10);
    Ok(c)
}

fn flexa_certificate(p: &Lasso, select: SelectionRule) -> Result<(FlexaStop, usize, f64)> {
    let cfg = FlexaConfig {
        max_iters: 5000,
        stop_tol: 0.0,
        tau: TauPolicy::adaptive(p.tau_heuristic()),
        v_star: p.v_star,
        target_re: Some(1e-6),
        workers: 1,
        seed: 0,
        record_iterates: false,
    };
    let run = flexa_run(
        p,
        &BlockPartition::scalar(p.cols())?,
        &LassoExact,
        &select,
        Schedule::guarded_default(),
        &InexactPolicy::exact(),
        &vec![0.0; p.cols()],
        &cfg,
    )?;
    let re = run.trace.last().map_or(f64::NAN, |r| r.re);
    Ok((run.stop, run.iterations(), re))
}

fn c05_flexa() -> Result<Checks> {
    let mut c = Checks::default();
    let p = generate_lasso(1000, 500, 0.01, 501)?;
    let (stop0, k0, re0) = flexa_certificate(&p, SelectionRule::All)?;
    let (stop5, k5, re5) = flexa_certificate(&p, SelectionRule::Greedy { rho: 0.5, bound: ErrorBound::Displacement })?;
    c.le(format!("sigma=0 re after {k0} iterations"), re0, 1e-6);
    c.require("sigma=0 reached the target", stop0 == FlexaStop::TargetReached);
    c.le(format!("sigma=0.5 re after {k5} iterations"), re5, 1e-6);
    c.require("sigma=0.5 reached the target", stop5 == FlexaStop::TargetReached);
    c.note(format!("recorded: sigma=0.5 uses no more iterations than sigma=0: {}", if k5 <= k0 { "yes" } else { "no" }));
    Ok(c)
}

fn c06_determinism() -> Result<Checks> {
    let mut c = Checks::default();
    let bodies = [
        ("lasso", "kind = lasso\nm = 200\nq = 100\nsparsity = 0.05\n", "selection = greedy\nsigma = 0.5\n"),
        ("lasso", "kind = lasso\nm = 200\nq = 100\nsparsity = 0.05\n", "selection = random\nsample = 20\n"),
        ("logistic", "kind = logistic\nsamples = 80\nfeatures = 60\nlambda = 0.01\n", "selection = all\n"),
        ("logistic", "kind = logistic\nsamples = 80\nfeatures = 60\nlambda = 0.01\n", "selection = greedy\nsigma = 0.3\n"),
    ];
    for (name, problem, algorithm) in bodies {
        let traces = [1usize, 2, 8]
            .iter()
            .map(|w| {
                let text = format!(
                    "[experiment]\nname = d\nseed = 7\n[problem]\n{problem}[algorithm]\nmodule = flexa\nworkers = {w}\n{algorithm}\
                     [budget]\nmax_iters = 200\n"
                );
                Ok(experiment::run(&RunConfig::parse(&text, None)?)?.trace.to_csv())
            })
            .collect::<Result<Vec<String>>>()?;
        let rule = algorithm.lines().next().unwrap_or("");
        c.require(format!("{name} {rule} identical for workers 1, 2, 8"), traces.iter().all(|t| *t == traces[0]));
    }
    Ok(c)
}

fn mean(x: &[Vec<f64>]) -> Vec<f64> {
    weighted_sum(x, None).into_iter().map(|v| v / x.len() as f64).collect()
}

fn c07_consensus() -> Result<Checks> {
    let mut c = Checks::default();
    let n = 10;
    let seq = GraphSequence::permuted_ring_plus_random(n, 701)?.undirected();
    let mut x = points(n, 3, 702);
    let sum0 = weighted_sum(&x, None);
    let (mut drift, mut dis): (f64, f64) = (0.0, f64::INFINITY);
    for k in 0..200 {
        let w = build_weights(&seq.step(k), WeightRule::Metropolis)?;
        x = consensus_step(&x, &w)?;
        drift = drift.max(max_abs_diff(&weighted_sum(&x, None), &sum0));
        let m = mean(&x);
        dis = dis.min(x.iter().map(|v| max_abs_diff(v, &m)).fold(0.0, f64::max));
    }
    c.le("doubly stochastic sum drift", drift, 1e-12);
    c.le("disagreement within 200 steps", dis, 1e-10);

    let seq = GraphSequence::permuted_ring_plus_random(n, 703)?;
    let x0 = points(n, 2, 704);
    let avg = mean(&x0);
    let run = perturbed_push_sum_run(&seq, WeightRule::PushSumOutdegree, |_, _, _| {}, x0.clone(), 300)?;
    let drift = run
        .states
        .iter()
        .map(|s| max_abs_diff(&s.weighted_sum(), &weighted_sum(&x0, None)))
        .fold(0.0, f64::max);
    c.le("push-sum weighted sum drift", drift, 1e-12);
    let (lb, ub) = phi_bounds(run.kappa, n, seq.b());
    c.require(format!("phi within [{lb:.3e}, {ub:.3e}]"), run.phi_min >= lb && run.phi_max <= ub);
    let last = run.states.last().map(|s| s.x.iter().map(|v| max_abs_diff(v, &avg)).fold(0.0, f64::max));
    c.le("push-sum distance to the average at step 300", last.unwrap_or(f64::NAN), 1e-10);

    let fit = log_linear_fit(&run.errors, 1e-13)?;
    c.require(format!("log-error slope {:.3e} is negative", fit.slope), fit.slope < 0.0);
    c.le("1 - R^2", 1.0 - fit.r2, 0.1);
    Ok(c)
}

fn c08_tracking() -> Result<Checks> {
    let mut c = Checks::default();
    let n = 10;
    let seq = GraphSequence::permuted_ring_plus_random(n, 801)?;
    let cs = points(n, 2, 802);
    let ds = points(n, 2, 803);
    let u = |k: usize| -> Vec<Vec<f64>> {
        cs.iter().zip(&ds).map(|(ci, di)| ci.iter().zip(di).map(|(a, b)| a + b / (k as f64 + 1.0)).collect()).collect()
    };
    let mut s = PushSumState::new(u(0))?;
    let mut drift: f64 = 0.0;
    let mut err = f64::NAN;
    for k in 0..500 {
        let a = build_weights(&seq.step(k), WeightRule::PushSumOutdegree)?;
        s = tracking_step(&s, &a, &u(k + 1), &u(k))?;
        drift = drift.max(max_abs_diff(&s.weighted_sum(), &weighted_sum(&u(k + 1), None)));
        let ubar = mean(&u(k + 1));
        err = s.x.iter().map(|v| dist2(v, &ubar)).fold(0.0, f64::max);
    }
    c.le("invariant drift", drift, 1e-12);
    c.le("tracking error at k = 500", err, 1e-6);
    Ok(c)
}

fn huber_run(inst: &HuberInstance, variant: HuberSurrogate, tau: f64, schedule: Schedule, iters: usize, tol: f64) -> Result<SonataResult> {
    let agents: Vec<_> = inst.agents.iter().map(|agent| HuberAgentProblem { agent, alpha: inst.alpha, variant, tau }).collect();
    let graph = GraphSequence::permuted_ring_plus_random(agents.len(), 901)?;
    let cfg = SonataConfig::new(schedule, graph, iters, tol);
    Ok(sonata_run(&agents, inst, &cfg, vec![vec![0.0; inst.dim()]; agents.len()])?)
}

/// First message count at which `J ≤ 1e-4` and `D ≤ 1e-8`.
fn first_hit(run: &SonataResult) -> Option<usize> {
    run.trace.iter().find(|r| r.j <= 1e-4 && r.d <= 1e-8).map(|r| r.messages)
}

fn c09_sonata_huber() -> Result<Checks> {
    let mut c = Checks::default();
    let inst = generate_huber(10, 20, 10, 0.1, 902)?;
    let lin = huber_run(&inst, HuberSurrogate::Linear, 2.0, Schedule::recursive(0.1, 0.01)?, 1000, 0.0)?;
    let quad = huber_run(&inst, HuberSurrogate::Quadratic, 1.5, Schedule::recursive(0.1, 0.01)?, 1000, 0.0)?;
    let last = lin.last();
    c.le(format!("J after {} messages", last.messages), last.j, 1e-4);
    c.le("D", last.d, 1e-8);
    let hit = first_hit(&lin);
    let show = |h: Option<usize>| h.map_or("never".to_string(), |h| h.to_string());
    c.require(format!("both bounds hold at message {}", show(hit)), hit.is_some());
    let oracle = oracle_proxgrad(&inst, Some(inst.lipschitz()), &vec![0.0; inst.dim()], 1e-12)?;
    c.le("distance to the centralized solution", dist2(&lin.x_bar(), &oracle.x), 1e-3);
    let ordered = match (first_hit(&quad), hit) {
        (Some(q), Some(l)) => q <= l,
        _ => false,
    };
    c.note(format!(
        "recorded: quadratic surrogate needs no more messages ({} vs {}): {}",
        show(first_hit(&quad)),
        show(hit),
        if ordered { "yes" } else { "no" }
    ));
    Ok(c)
}

/// Sum of per-agent quadratics.
struct QuadraticSum<'a>(&'a [Quadratic]);

impl CompositeProblem for QuadraticSum<'_> {
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

fn axpy_rows(a: &[Vec<f64>], s: f64, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + s * q).collect()).collect()
}

/// Largest iterate gap between linearized SONATA and the textbook recursion it reduces to.
fn special_case(mode: Combine) -> Result<f64> {
    let (n, m, gamma) = (6, 4, 0.05);
    let qs: Vec<Quadratic> = (0..n).map(|i| random_spd_quadratic(m, 0.5, 1001 + i as u64)).collect::<sca_core::Result<_>>()?;
    let agents: Vec<_> = qs.iter().map(|q| Linearized::new(q, n as f64)).collect::<sca_core::Result<_>>()?;
    let g = GraphStep::ring(n)?.symmetrized();
    let w: WeightMatrix = build_weights(&g, WeightRule::Metropolis)?;
    let mut cfg = SonataConfig::new(Schedule::constant(gamma)?, GraphSequence::fixed(g)?, 100, 0.0);
    cfg.rule = WeightRule::Metropolis;
    cfg.variant = SonataVariant { x: mode, y: mode };
    cfg.record_iterates = true;
    let x0 = points(n, m, 1002);
    let run = sonata_run(&agents, &QuadraticSum(&qs), &cfg, x0.clone())?;

    let mix = |v: &[Vec<f64>]| consensus_step(v, &w);
    let mut x = x0;
    let mut gr = grads(&qs, &x);
    let mut y = gr.clone();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let x_next = match mode {
            Combine::Atc => mix(&axpy_rows(&x, -gamma, &y))?,
            Combine::Caa => axpy_rows(&mix(&x)?, -gamma, &y),
        };
        let g_next = grads(&qs, &x_next);
        let diff = axpy_rows(&g_next, -1.0, &gr);
        y = match mode {
            Combine::Atc => mix(&axpy_rows(&y, 1.0, &diff))?,
            Combine::Caa => axpy_rows(&mix(&y)?, 1.0, &diff),
        };
        x = x_next;
        gr = g_next;
        let gap = run.iterates[k + 1].iter().flatten().zip(x.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    Ok(worst)
}

fn c10_special_cases() -> Result<Checks> {
    let mut c = Checks::default();
    c.le("ATC-SONATA vs Aug-DGM, 100 iterations", special_case(Combine::Atc)?, 1e-12);
    c.le("CAA-SONATA vs DIGing, 100 iterations", special_case(Combine::Caa)?, 1e-12);
    Ok(c)
}

fn c11_rate() -> Result<Checks> {
    let mut c = Checks::default();
    let inst = generate_huber(10, 20, 10, 0.1, 902)?;
    let run = huber_run(&inst, HuberSurrogate::Linear, 2.0, Schedule::constant(0.05)?, 20_000, 1e-3)?;
    let mut products = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        match run.trace.iter().find(|r| r.m <= eps) {
            Some(r) => {
                products.push(r.round as f64 * eps);
                c.note(format!("T({eps:e}) = {}", r.round));
            }
            None => c.require(format!("M <= {eps:e} reached"), false),
        }
    }
    if products.len() == 3 {
        let hi = products.iter().copied().fold(0.0, f64::max);
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        c.le("spread of T*eps", hi / lo.max(f64::MIN_POSITIVE), 5.0);
    }
    Ok(c)
}

fn c12_localization() -> Result<Checks> {
    let mut c = Checks::default();
    let inst: LocalizationInstance = generate_localization(10, 2, 2, 0.5, 0.0, 1201)?;
    let mut r = rng(1202);
    let x0: Vec<Vec<f64>> = (0..10).map(|_| uniform(&mut r, inst.dim(), 0.0, 1.0)).collect();
    let variants = [(LocalizationSurrogate::Linear, 7.0), (LocalizationSurrogate::PartialConvex, 5.0)];
    for (variant, tau) in variants {
        let agents: Vec<_> = (0..10).map(|sensor| LocalizationAgent { instance: &inst, sensor, variant, tau }).collect();
        let graph = GraphSequence::permuted_ring_plus_random(10, 1203)?;
        let cfg = SonataConfig::new(Schedule::recursive(0.1, 1e-4)?, graph, 5000, 0.0);
        let run = sonata_run(&agents, &inst, &cfg, x0.clone())?;
        let name = format!("{variant:?}");
        c.le(format!("{name} J"), run.last().j, 1e-5);
        let xb = run.x_bar();
        let k = inst.space_dim();
        let mut worst: f64 = 0.0;
        for t in 0..inst.targets {
            let slice = |z: &[f64]| {
                let mut y = xb.clone();
                y[t * k..(t + 1) * k].copy_from_slice(z);
                inst.eval_f(&y)
            };
            let centre = &xb[t * k..(t + 1) * k];
            let lo: Vec<f64> = centre.iter().map(|v| v - 0.05).collect();
            let hi: Vec<f64> = centre.iter().map(|v| v + 0.05).collect();
            let g = oracle_gridmin(slice, &lo, &hi, 1e-4)?;
            let interior = g.argmin.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| *v > a + 1e-3 && *v < b - 1e-3);
            c.require(format!("{name} target {t} grid minimizer is interior"), interior);
            for xi in &run.state.x {
                worst = worst.max(dist2(&xi[t * k..(t + 1) * k], &g.argmin));
            }
        }
        c.le(format!("{name} worst agent distance to a grid-validated critical point"), worst, 1e-3);
    }
    Ok(c)
}
