//! The experiment driver: builds the problem and algorithm named by a [`RunConfig`], runs it, and
//! produces a trace and a summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sca_core::base::{BlockPartition, CompositeProblem};
use sca_core::flexa::{flexa_run, FlexaConfig, FlexaResult, InexactPolicy, ProxLinear, SurrogateFamily, TauPolicy};
use sca_core::linalg::dist2;
use sca_core::mm::{nnls_mm, sparse_ls_mm, MmConfig, MmTrace, NnlsVariant, SparseLsVariant};
use sca_core::network::{perturbed_push_sum_run, GraphSequence, GraphStep, WeightRule};
use sca_core::problems::{
    generate_huber, generate_lasso, generate_localization, generate_logistic, HuberInstance, Lasso, LassoExact,
    LocalizationInstance, Logistic, LogisticNewton,
};
use sca_core::sonata::{
    sonata_run, HuberAgentProblem, LocalizationAgent, SonataConfig, SonataResult, SonataVariant,
};

use crate::config::{
    AlgorithmSpec, FlexaSpec, GraphKind, GraphSpec, LassoSource, LogisticSource, MatrixSource, MmVariant, Perturbation,
    ProblemSpec, RunConfig, SonataSpec, SonataSurrogate, TauSpec,
};
use crate::error::{BenchError, Result};
use crate::io::{read_edge_list_file, read_matrix, read_vector};
use crate::oracle::oracle_proxgrad;
use crate::trace::Trace;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SCA_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "sca-out";

/// Ordered `key = value` pairs, written in the config format under `[summary]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[summary]\n");
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: Summary,
}

/// Run the experiment described by `cfg`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let mut out = match (&cfg.problem, &cfg.algorithm) {
        (ProblemSpec::Lasso(src), AlgorithmSpec::Flexa(spec)) => {
            let p = build_lasso(src)?;
            let heuristic = p.tau_heuristic();
            if spec.prox_linear {
                flexa_output(&p, &ProxLinear, spec, cfg, p.v_star, heuristic)?
            } else {
                flexa_output(&p, &LassoExact, spec, cfg, p.v_star, heuristic)?
            }
        }
        (ProblemSpec::Logistic(src), AlgorithmSpec::Flexa(spec)) => {
            let p = build_logistic(src)?;
            let heuristic = p.tau_heuristic();
            if spec.prox_linear {
                flexa_output(&p, &ProxLinear, spec, cfg, None, heuristic)?
            } else {
                flexa_output(&p, &LogisticNewton, spec, cfg, None, heuristic)?
            }
        }
        (ProblemSpec::Huber { agents, m, rows, sigma, seed }, AlgorithmSpec::Sonata(spec)) => {
            let inst = generate_huber(*agents, *m, *rows, *sigma, *seed)?;
            huber_output(&inst, spec, cfg)?
        }
        (ProblemSpec::Localization { sensors, targets, dim, p_obs, noise, bounds, seed }, AlgorithmSpec::Sonata(spec)) => {
            let mut inst = generate_localization(*sensors, *targets, *dim, *p_obs, *noise, *seed)?;
            if let Some((lo, hi)) = bounds {
                inst = inst.with_box(vec![*lo; *dim], vec![*hi; *dim])?;
            }
            localization_output(&inst, spec, cfg)?
        }
        (ProblemSpec::Consensus { nodes, dim, seed }, AlgorithmSpec::Consensus { perturbation }) => {
            consensus_output(*nodes, *dim, *seed, *perturbation, cfg)?
        }
        (ProblemSpec::SparseLs { data, lambda, penalty }, AlgorithmSpec::Mm { variant, inner_max_iters, inner_tol }) => {
            let (a, z) = least_squares_data(data, false)?;
            let v = match variant {
                MmVariant::OneStep => SparseLsVariant::OneStep,
                _ => SparseLsVariant::DoubleLoop,
            };
            let mc = mm_config(cfg, *inner_max_iters, *inner_tol);
            mm_output(sparse_ls_mm(&a, &z, *lambda, *penalty, v, &vec![0.0; a.ncols()], &mc)?)?
        }
        (ProblemSpec::Nnls { data }, AlgorithmSpec::Mm { variant, inner_max_iters, inner_tol }) => {
            let (a, z) = least_squares_data(data, true)?;
            let (v, x0) = match variant {
                MmVariant::Multiplicative => (NnlsVariant::Multiplicative, vec![1.0; a.ncols()]),
                _ => (NnlsVariant::GradProj, vec![0.0; a.ncols()]),
            };
            let mc = mm_config(cfg, *inner_max_iters, *inner_tol);
            mm_output(nnls_mm(&a, &z, v, &x0, &mc)?)?
        }
        (p, a) => return Err(BenchError::config(0, format!("module {} cannot run problem kind {}", a.module(), p.kind()))),
    };
    let mut summary = Summary::default();
    summary.set("experiment", &cfg.name);
    summary.set("seed", cfg.seed);
    summary.set("problem", cfg.problem.kind());
    summary.set("module", cfg.algorithm.module());
    for (k, v) in out.summary.entries() {
        summary.set(k, v);
    }
    summary.set("seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    out.summary = summary;
    Ok(out)
}

/// Resolve the output directory: the config's, else `SCA_OUT_DIR`, else `sca-out`.
pub fn output_dir(cfg: &RunConfig, cli_override: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_override {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output {
        return p.clone();
    }
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Write `<name>.trace.csv` and `<name>.summary` into `dir`.
pub fn write_outputs(name: &str, out: &RunOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let trace = dir.join(format!("{name}.trace.csv"));
    let summary = dir.join(format!("{name}.summary"));
    out.trace.write_file(&trace)?;
    std::fs::write(&summary, out.summary.to_text()).map_err(|e| BenchError::io(&summary, e))?;
    Ok((trace, summary))
}

pub fn build_lasso(src: &LassoSource) -> Result<Lasso> {
    match src {
        LassoSource::Generate { m, q, sparsity, seed } => Ok(generate_lasso(*m, *q, *sparsity, *seed)?),
        LassoSource::File { a, z, lambda, v_star } => {
            let mut p = Lasso::new(read_matrix(a)?, read_vector(z)?, *lambda)?;
            p.v_star = *v_star;
            Ok(p)
        }
    }
}

pub fn build_logistic(src: &LogisticSource) -> Result<Logistic> {
    match src {
        LogisticSource::Generate { samples, features, lambda, seed } => {
            Ok(generate_logistic(*samples, *features, *lambda, *seed)?)
        }
        LogisticSource::File { z, w, lambda } => Ok(Logistic::new(read_matrix(z)?, read_vector(w)?, *lambda, false)?),
    }
}

/// Gaussian `A` (uniform on `[0,1]` when `nonneg`), a 10%-sparse ground truth (nonnegative when
/// `nonneg`) and `z = Ax + 0.01·noise`.
pub fn generate_least_squares(rows: usize, cols: usize, nonneg: bool, seed: u64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let a = DMatrix::from_fn(rows, cols, |_, _| if nonneg { rng.gen_range(0.0..1.0) } else { rng.sample::<f64, _>(StandardNormal) * scale });
    let x: Vec<f64> = (0..cols)
        .map(|j| {
            if j % 10 == 0 {
                if nonneg {
                    rng.gen_range(0.5..2.0)
                } else {
                    rng.gen_range(-2.0..2.0)
                }
            } else {
                0.0
            }
        })
        .collect();
    let z = (0..rows).map(|i| (0..cols).map(|j| a[(i, j)] * x[j]).sum::<f64>() + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
    (a, z, x)
}

fn least_squares_data(src: &MatrixSource, nonneg: bool) -> Result<(DMatrix<f64>, Vec<f64>)> {
    match src {
        MatrixSource::Generate { rows, cols, seed } => {
            let (a, z, _) = generate_least_squares(*rows, *cols, nonneg, *seed);
            Ok((a, z))
        }
        MatrixSource::File { a, z } => {
            let a = read_matrix(a)?;
            let z = read_vector(z)?;
            if z.len() != a.nrows() {
                return Err(BenchError::config(0, format!("z has {} entries, A has {} rows", z.len(), a.nrows())));
            }
            Ok((a, z))
        }
    }
}

/// The graph sequence described by `spec` on `nodes` agents.
pub fn build_graph(spec: &GraphSpec, nodes: usize) -> Result<GraphSequence> {
    let seq = match &spec.kind {
        GraphKind::PermutedRingRandom => GraphSequence::permuted_ring_plus_random(nodes, spec.seed)?,
        GraphKind::Ring => GraphSequence::fixed(GraphStep::ring(nodes)?)?,
        GraphKind::Path => GraphSequence::fixed(GraphStep::path(nodes)?)?,
        GraphKind::Complete => GraphSequence::fixed(GraphStep::complete(nodes)?)?,
        GraphKind::File { path, b } => GraphSequence::custom(read_edge_list_file(path, nodes)?, *b)?,
    };
    Ok(if spec.undirected { seq.undirected() } else { seq })
}

fn nan_if_none(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn flexa_output<P, S>(problem: &P, surrogate: &S, spec: &FlexaSpec, cfg: &RunConfig, v_star: Option<f64>, heuristic: f64) -> Result<RunOutput>
where
    P: CompositeProblem,
    S: SurrogateFamily<P>,
{
    let m = problem.dim();
    let tau = match spec.tau {
        TauSpec::Uniform(t) => TauPolicy::Uniform(t),
        TauSpec::Adaptive(t) => TauPolicy::adaptive(t.unwrap_or(heuristic)),
    };
    let fc = FlexaConfig {
        max_iters: cfg.budget.max_iters,
        stop_tol: cfg.tolerances.stop,
        tau,
        v_star,
        target_re: cfg.tolerances.target_re,
        workers: spec.workers,
        seed: cfg.seed,
        record_iterates: false,
    };
    let run = flexa_run(
        problem,
        &BlockPartition::scalar(m)?,
        surrogate,
        &spec.selection,
        spec.schedule.clone(),
        &InexactPolicy::exact(),
        &vec![0.0; m],
        &fc,
    )?;
    flexa_trace(&run, v_star.is_some())
}

/// Trace and summary of a FLEXA run; the `re` column is present when `V*` is known.
pub fn flexa_trace(run: &FlexaResult, with_re: bool) -> Result<RunOutput> {
    let mut cols = vec!["iteration", "objective"];
    if with_re {
        cols.push("re");
    }
    cols.extend(["fixed_point_residual", "relative_descent", "stepsize", "selected", "tau_scale", "accepted"]);
    let mut trace = Trace::new(cols)?;
    for r in &run.trace {
        let mut row = vec![r.iteration as f64, r.merit.objective];
        if with_re {
            row.push(r.re);
        }
        let rd = if r.iteration == 0 { f64::NAN } else { r.merit.relative_descent };
        row.extend([r.merit.fixed_point_residual, rd, r.stepsize, r.selected as f64, r.tau_scale, if r.accepted { 1.0 } else { 0.0 }]);
        trace.push(&row)?;
    }
    let mut summary = Summary::default();
    summary.set("stop", format!("{:?}", run.stop));
    summary.set("iterations", run.iterations());
    summary.set("objective", run.objective());
    if let Some(last) = run.trace.last() {
        if with_re {
            summary.set("re", last.re);
        }
        summary.set("fixed_point_residual", last.merit.fixed_point_residual);
    }
    summary.set("tau_changes", run.tau_changes);
    Ok(RunOutput { trace, summary })
}

fn sonata_config(spec: &SonataSpec, cfg: &RunConfig, nodes: usize) -> Result<SonataConfig> {
    let g = cfg.graph.as_ref().ok_or_else(|| BenchError::config(0, "SONATA needs a [graph] section"))?;
    let graph = build_graph(g, nodes)?;
    let iters = match cfg.budget.max_messages {
        Some(msg) => cfg.budget.max_iters.min(msg / 2),
        None => cfg.budget.max_iters,
    };
    let mut sc = SonataConfig::new(spec.schedule.clone(), graph, iters, cfg.tolerances.stop);
    sc.variant = SonataVariant { x: spec.x_update, y: spec.y_update };
    sc.rule = g.weights;
    sc.workers = spec.workers;
    Ok(sc)
}

/// Trace columns of a SONATA run.
pub const SONATA_COLUMNS: [&str; 9] =
    ["round", "messages", "J", "D", "M", "mean_objective", "stepsize", "consensus_err_x", "tracking_err_y"];

pub fn sonata_trace(run: &SonataResult) -> Result<RunOutput> {
    let mut trace = Trace::new(SONATA_COLUMNS)?;
    for r in &run.trace {
        trace.push(&[
            r.round as f64,
            r.messages as f64,
            r.j,
            r.d,
            r.m,
            r.mean_objective,
            r.stepsize,
            r.consensus_err_x,
            r.tracking_err_y,
        ])?;
    }
    let mut summary = Summary::default();
    summary.set("stop", format!("{:?}", run.stop));
    summary.set("iterations", run.iterations());
    if let Some(last) = run.trace.last() {
        summary.set("messages", last.messages);
        summary.set("J", last.j);
        summary.set("D", last.d);
        summary.set("M", last.m);
        summary.set("objective", last.mean_objective);
    }
    Ok(RunOutput { trace, summary })
}

pub fn huber_agents<'a>(inst: &'a HuberInstance, spec: &SonataSpec) -> Result<Vec<HuberAgentProblem<'a>>> {
    let SonataSurrogate::Huber(variant) = spec.surrogate else {
        return Err(BenchError::config(0, "surrogate does not apply to huber"));
    };
    Ok(inst.agents.iter().map(|agent| HuberAgentProblem { agent, alpha: inst.alpha, variant, tau: spec.tau }).collect())
}

fn huber_output(inst: &HuberInstance, spec: &SonataSpec, cfg: &RunConfig) -> Result<RunOutput> {
    let agents = huber_agents(inst, spec)?;
    let sc = sonata_config(spec, cfg, agents.len())?;
    let m = inst.dim();
    let run = sonata_run(&agents, inst, &sc, vec![vec![0.0; m]; agents.len()])?;
    let mut out = sonata_trace(&run)?;
    let oracle = oracle_proxgrad(inst, None, &vec![0.0; m], 1e-12)?;
    out.summary.set("centralized_gap", dist2(&run.x_bar(), &oracle.x));
    Ok(out)
}

pub fn localization_agents<'a>(inst: &'a LocalizationInstance, spec: &SonataSpec) -> Result<Vec<LocalizationAgent<'a>>> {
    let SonataSurrogate::Localization(variant) = spec.surrogate else {
        return Err(BenchError::config(0, "surrogate does not apply to localization"));
    };
    Ok((0..inst.agents()).map(|sensor| LocalizationAgent { instance: inst, sensor, variant, tau: spec.tau }).collect())
}

/// Independent uniform starting points, inside the instance's box or `[0,1]ᵈ`.
pub fn localization_start(inst: &LocalizationInstance, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let k = inst.space_dim();
    let (lo, hi) = inst.bounds.clone().unwrap_or((vec![0.0; k], vec![1.0; k]));
    (0..inst.agents()).map(|_| (0..inst.dim()).map(|j| rng.gen_range(lo[j % k]..=hi[j % k])).collect()).collect()
}

fn localization_output(inst: &LocalizationInstance, spec: &SonataSpec, cfg: &RunConfig) -> Result<RunOutput> {
    let agents = localization_agents(inst, spec)?;
    let sc = sonata_config(spec, cfg, agents.len())?;
    let run = sonata_run(&agents, inst, &sc, localization_start(inst, cfg.seed))?;
    let mut out = sonata_trace(&run)?;
    if let Some(t) = &inst.truth {
        out.summary.set("truth_gap", dist2(&run.x_bar(), t));
    }
    Ok(out)
}

fn consensus_output(nodes: usize, dim: usize, seed: u64, perturbation: Perturbation, cfg: &RunConfig) -> Result<RunOutput> {
    let g = cfg.graph.as_ref().ok_or_else(|| BenchError::config(0, "consensus needs a [graph] section"))?;
    let seq = build_graph(g, nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<Vec<f64>> = (0..nodes).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let eps = move |k: usize, i: usize, out: &mut [f64]| match perturbation {
        Perturbation::None => {}
        Perturbation::Vanishing(c) => out.iter_mut().for_each(|v| *v = c / ((k + 1) as f64).powi(2)),
        Perturbation::Bounded(c) => out.iter_mut().for_each(|v| *v = if i.is_multiple_of(2) { c } else { -c }),
    };
    let run = perturbed_push_sum_run(&seq, g.weights, eps, x0, cfg.budget.max_iters)?;
    let s0 = run.states[0].weighted_sum();
    let mut trace = Trace::new(["step", "error", "phi_min", "phi_max", "sum_change"])?;
    for (k, (s, e)) in run.states.iter().zip(&run.errors).enumerate() {
        let lo = s.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let change = s.weighted_sum().iter().zip(&s0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.push(&[k as f64, *e, lo, hi, change])?;
    }
    let mut summary = Summary::default();
    summary.set("steps", cfg.budget.max_iters);
    summary.set("error", run.errors.last().copied().unwrap_or(f64::NAN));
    summary.set("phi_min", run.phi_min);
    summary.set("phi_max", run.phi_max);
    summary.set("kappa", run.kappa);
    summary.set("doubly_stochastic", g.weights != WeightRule::PushSumOutdegree);
    Ok(RunOutput { trace, summary })
}

fn mm_config(cfg: &RunConfig, inner_max_iters: usize, inner_tol: f64) -> MmConfig {
    MmConfig {
        max_iters: cfg.budget.max_iters,
        tol_relative_descent: cfg.tolerances.relative_descent,
        tol_iterate_delta: cfg.tolerances.stop,
        inner_max_iters,
        inner_tol,
        record_iterates: false,
        ..MmConfig::default()
    }
}

fn mm_output(t: MmTrace) -> Result<RunOutput> {
    let mut trace = Trace::new(["iteration", "objective", "relative_descent", "iterate_delta", "chain_violation"])?;
    if let Some(c) = t.chain.first() {
        trace.push(&[0.0, c.v_prev, f64::NAN, f64::NAN, f64::NAN])?;
    }
    for (k, (r, c)) in t.reports.iter().zip(&t.chain).enumerate() {
        trace.push(&[(k + 1) as f64, r.objective, r.relative_descent, r.iterate_delta, c.violation()])?;
    }
    let mut summary = Summary::default();
    summary.set("stop", format!("{:?}", t.stop));
    summary.set("iterations", t.iterations());
    summary.set("objective", nan_if_none(t.reports.last().map(|r| r.objective)));
    summary.set("max_chain_violation", t.max_chain_violation());
    Ok(RunOutput { trace, summary })
}
