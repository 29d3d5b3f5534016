//! SONATA: distributed SCA with push-sum consensus on `x` and gradient tracking on `y`.
//!
//! Each agent `i` owns a smooth `fᵢ`; all agents share `G` and `X`, which are taken from a
//! centralized [`CompositeProblem`] whose `F` is `Σᵢ fᵢ`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::base::merit::prox_gradient_residual;
use crate::base::problem::CompositeProblem;
use crate::base::schedule::{Schedule, ScheduleKind};
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::linalg::{compensated_sum, dist2, norm_inf};
use crate::network::{build_weights, GraphSequence, WeightMatrix, WeightRule};
use crate::problems::{HuberAgent, HuberSurrogate, LocalizationInstance, LocalizationSurrogate};

/// One agent's smooth cost `fᵢ` and its strongly convex surrogate `f̃ᵢ(·|xᵏ)`.
pub trait AgentProblem: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `argmin_{x ∈ X} f̃ᵢ(x|xk) + aggᵀ(x − xk) + G(x)`.
    fn surrogate_solve(&self, xk: &[f64], agg: &[f64]) -> Result<Vec<f64>>;
    /// `∇f̃ᵢ(x|xk)`, used for consistency checks.
    fn surrogate_gradient(&self, x: &[f64], xk: &[f64], out: &mut [f64]);
    /// Euclidean projection onto `X`.
    fn project(&self, _x: &mut [f64]) {}
}

/// `fᵢ(xᵏ) + ∇fᵢ(xᵏ)ᵀ(x − xᵏ) + (τ/2)‖x − xᵏ‖²` over the `G` and `X` of `f` itself.
#[derive(Debug, Clone, Copy)]
pub struct Linearized<'a, P> {
    pub f: &'a P,
    pub tau: f64,
}

impl<'a, P: CompositeProblem + Sync> Linearized<'a, P> {
    pub fn new(f: &'a P, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            bail!(Config, "tau must be positive, got {tau}");
        }
        Ok(Self { f, tau })
    }
}

impl<P: CompositeProblem + Sync> AgentProblem for Linearized<'_, P> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.f.eval_f(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.f.grad_f(x, out)
    }

    fn surrogate_solve(&self, xk: &[f64], agg: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut g = vec![0.0; m];
        self.f.grad_f(xk, &mut g);
        let v: Vec<f64> = (0..m).map(|j| xk[j] - (g[j] + agg[j]) / self.tau).collect();
        let mut out = vec![0.0; m];
        self.f.prox_block(0..m, &v, 1.0 / self.tau, &mut out);
        Ok(out)
    }

    fn surrogate_gradient(&self, x: &[f64], xk: &[f64], out: &mut [f64]) {
        self.f.grad_f(xk, out);
        for ((o, a), b) in out.iter_mut().zip(x).zip(xk) {
            *o += self.tau * (a - b);
        }
    }

    fn project(&self, x: &mut [f64]) {
        self.f.project(x)
    }
}

/// A Huber agent with the linear or reweighted-quadratic surrogate; `X = ℝᵐ`, `G = 0`.
#[derive(Debug, Clone, Copy)]
pub struct HuberAgentProblem<'a> {
    pub agent: &'a HuberAgent,
    pub alpha: f64,
    pub variant: HuberSurrogate,
    pub tau: f64,
}

impl AgentProblem for HuberAgentProblem<'_> {
    fn dim(&self) -> usize {
        self.agent.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.agent.value(x, self.alpha)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.agent.gradient(x, self.alpha, out)
    }

    fn surrogate_solve(&self, xk: &[f64], agg: &[f64]) -> Result<Vec<f64>> {
        self.agent.surrogate_solve(xk, agg, self.alpha, self.variant, self.tau)
    }

    fn surrogate_gradient(&self, x: &[f64], xk: &[f64], out: &mut [f64]) {
        self.agent.surrogate_gradient(x, xk, self.alpha, self.variant, self.tau, out)
    }
}

/// Sensor `i` of a localization instance; `X` is the instance's box.
#[derive(Debug, Clone, Copy)]
pub struct LocalizationAgent<'a> {
    pub instance: &'a LocalizationInstance,
    pub sensor: usize,
    pub variant: LocalizationSurrogate,
    pub tau: f64,
}

impl AgentProblem for LocalizationAgent<'_> {
    fn dim(&self) -> usize {
        self.instance.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.instance.agent_value(self.sensor, x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.instance.agent_gradient(self.sensor, x, out)
    }

    fn surrogate_solve(&self, xk: &[f64], agg: &[f64]) -> Result<Vec<f64>> {
        self.instance.surrogate_solve(self.sensor, xk, agg, self.variant, self.tau)
    }

    fn surrogate_gradient(&self, x: &[f64], xk: &[f64], out: &mut [f64]) {
        self.instance.surrogate_gradient(self.sensor, x, xk, self.variant, self.tau, out)
    }

    fn project(&self, x: &mut [f64]) {
        let k = self.instance.space_dim();
        for t in x.chunks_mut(k) {
            self.instance.project_target(t);
        }
    }
}

/// Adapt-then-combine or combine-and-adapt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Atc,
    Caa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SonataVariant {
    pub x: Combine,
    pub y: Combine,
}

impl Default for SonataVariant {
    /// ATC on `x`, CAA on `y`.
    fn default() -> Self {
        Self { x: Combine::Atc, y: Combine::Caa }
    }
}

#[derive(Debug, Clone)]
pub struct SonataConfig {
    pub variant: SonataVariant,
    pub schedule: Schedule,
    pub graph: GraphSequence,
    pub rule: WeightRule,
    pub max_iters: usize,
    /// Stop once `M(xᵏ) ≤ tol`; zero disables the test.
    pub tol: f64,
    pub workers: usize,
    pub record_iterates: bool,
}

impl SonataConfig {
    /// Push-sum weights, default variant, no iterate recording.
    pub fn new(schedule: Schedule, graph: GraphSequence, max_iters: usize, tol: f64) -> Self {
        Self {
            variant: SonataVariant::default(),
            schedule,
            graph,
            rule: WeightRule::PushSumOutdegree,
            max_iters,
            tol,
            workers: 1,
            record_iterates: false,
        }
    }
}

/// Per-agent `xᵢ`, `yᵢ`, `φᵢ` and the cached `∇fᵢ(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SonataState {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

impl SonataState {
    /// `φ⁰ = 1`, `yᵢ⁰ = ∇fᵢ(xᵢ⁰)`.
    pub fn new<A: AgentProblem>(agents: &[A], x0: Vec<Vec<f64>>) -> Result<Self> {
        if agents.is_empty() || x0.len() != agents.len() {
            bail!(Domain, "{} initial points for {} agents", x0.len(), agents.len());
        }
        let m = agents[0].dim();
        if agents.iter().any(|a| a.dim() != m) || x0.iter().any(|v| v.len() != m) {
            bail!(Domain, "agents and initial points disagree on the dimension");
        }
        let grads: Vec<Vec<f64>> = agents
            .iter()
            .zip(&x0)
            .map(|(a, x)| {
                let mut g = vec![0.0; m];
                a.gradient(x, &mut g);
                g
            })
            .collect();
        Ok(Self { phi: vec![1.0; x0.len()], y: grads.clone(), grads, x: x0 })
    }

    pub fn agents(&self) -> usize {
        self.x.len()
    }

    /// `x̄ = (1/I) Σᵢ xᵢ`.
    pub fn mean_x(&self) -> Vec<f64> {
        mean(&self.x)
    }

    /// `D(x) = ‖x − 1 ⊗ x̄‖₂`.
    pub fn disagreement(&self) -> f64 {
        let xb = self.mean_x();
        compensated_sum(self.x.iter().map(|v| v.iter().zip(&xb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())).sqrt()
    }

    /// `‖Σφᵢyᵢ − Σ∇fᵢ(xᵢ)‖∞`, zero in exact arithmetic.
    pub fn tracking_drift(&self) -> f64 {
        let m = self.x[0].len();
        (0..m)
            .map(|c| {
                let py = compensated_sum(self.y.iter().zip(&self.phi).map(|(y, p)| p * y[c]));
                let g = compensated_sum(self.grads.iter().map(|g| g[c]));
                (py - g).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn mean(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x[0].len()).map(|c| compensated_sum(x.iter().map(|v| v[c])) / n).collect()
}

/// `J(x̄) = ‖x̄ − prox_G^X(x̄ − ∇F(x̄))‖` with unit proximal weight.
pub fn merit_j<P: CompositeProblem + ?Sized>(problem: &P, x_bar: &[f64]) -> f64 {
    prox_gradient_residual(problem, x_bar)
}

/// Step 2 for one agent: returns `(x̃ᵢ, xᵢ + γ(x̃ᵢ − xᵢ))`.
pub fn sonata_local_step<A: AgentProblem + ?Sized>(
    agent: &A,
    x_i: &[f64],
    y_i: &[f64],
    grad_i: &[f64],
    agents: usize,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        bail!(Domain, "step-size must lie in (0,1], got {gamma}");
    }
    let agg: Vec<f64> = y_i.iter().zip(grad_i).map(|(y, g)| agents as f64 * y - g).collect();
    let xt = agent.surrogate_solve(x_i, &agg)?;
    if xt.len() != x_i.len() || !xt.iter().all(|v| v.is_finite()) {
        bail!(Numerical, "local surrogate solve returned an invalid point");
    }
    let half = x_i.iter().zip(&xt).map(|(a, b)| a + gamma * (b - a)).collect();
    Ok((xt, half))
}

/// Step 3: `φ ← Aφ`, mix `x` (from `x_half`) and `y` per `variant`, and refresh the gradient cache.
pub fn sonata_communicate<A: AgentProblem>(
    state: &SonataState,
    a: &WeightMatrix,
    x_half: &[Vec<f64>],
    agents: &[A],
    variant: SonataVariant,
    exec: &Executor,
) -> Result<SonataState> {
    if !a.tag().columns() {
        bail!(Contract, "SONATA needs column-stochastic weights, got {:?}", a.tag());
    }
    let n = state.agents();
    if a.nodes() != n || x_half.len() != n || agents.len() != n {
        bail!(Domain, "agent counts disagree");
    }
    let m = state.x[0].len();
    let phi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j) * state.phi[j]).sum()).collect();
    if let Some(i) = phi.iter().position(|p| !(*p > 0.0)) {
        bail!(Invariant, "phi[{i}] = {} is not positive", phi[i]);
    }
    let combine = |i: usize, src: &[Vec<f64>]| -> Vec<f64> {
        let mut acc = vec![0.0; m];
        for (j, v) in src.iter().enumerate() {
            let c = a.get(i, j) * state.phi[j];
            if c != 0.0 {
                acc.iter_mut().zip(v).for_each(|(o, s)| *o += c * s);
            }
        }
        acc
    };
    let x: Vec<Vec<f64>> = exec.map(n, |i| {
        let mut v = match variant.x {
            Combine::Atc => combine(i, x_half),
            Combine::Caa => combine(i, &state.x),
        };
        v.iter_mut().for_each(|s| *s /= phi[i]);
        if variant.x == Combine::Atc {
            // A convex combination of feasible points; this only removes rounding.
            agents[i].project(&mut v);
        } else {
            let r = state.phi[i] / phi[i];
            for ((o, h), xo) in v.iter_mut().zip(&x_half[i]).zip(&state.x[i]) {
                *o += r * (h - xo);
            }
        }
        v
    });
    let grads: Vec<Vec<f64>> = exec.map(n, |i| {
        let mut g = vec![0.0; m];
        agents[i].gradient(&x[i], &mut g);
        g
    });
    let y: Vec<Vec<f64>> = exec.map(n, |i| {
        let mut v = combine(i, &state.y);
        match variant.y {
            Combine::Caa => {
                for ((o, gn), go) in v.iter_mut().zip(&grads[i]).zip(&state.grads[i]) {
                    *o += gn - go;
                }
            }
            Combine::Atc => {
                for (j, (gj, gj_old)) in grads.iter().zip(&state.grads).enumerate() {
                    let c = a.get(i, j);
                    if c != 0.0 {
                        for ((o, gn), go) in v.iter_mut().zip(gj).zip(gj_old) {
                            *o += c * (gn - go);
                        }
                    }
                }
            }
        }
        v.iter_mut().for_each(|s| *s /= phi[i]);
        v
    });
    Ok(SonataState { x, y, phi, grads })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SonataStop {
    Converged,
    MaxIters,
}

/// Trace row for `xᵏ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonataRecord {
    pub round: usize,
    /// Broadcast rounds so far, two per iteration.
    pub messages: usize,
    pub j: f64,
    pub d: f64,
    pub m: f64,
    /// `V(x̄)`.
    pub mean_objective: f64,
    /// The step-size used to reach this iterate (`NaN` for the start).
    pub stepsize: f64,
    /// `maxᵢ ‖xᵢ − x̄‖`.
    pub consensus_err_x: f64,
    /// `maxᵢ ‖yᵢ − (1/I)Σⱼ∇fⱼ(xⱼ)‖`.
    pub tracking_err_y: f64,
    /// `‖Σφᵢyᵢ − Σ∇fᵢ(xᵢ)‖∞`.
    pub tracking_drift: f64,
}

#[derive(Debug, Clone)]
pub struct SonataResult {
    pub state: SonataState,
    pub trace: Vec<SonataRecord>,
    pub iterates: Vec<Vec<Vec<f64>>>,
    pub stop: SonataStop,
}

impl SonataResult {
    pub fn x_bar(&self) -> Vec<f64> {
        self.state.mean_x()
    }

    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn last(&self) -> &SonataRecord {
        self.trace.last().expect("trace holds the start")
    }
}

fn record<P: CompositeProblem + ?Sized>(problem: &P, s: &SonataState, round: usize, stepsize: f64) -> SonataRecord {
    let xb = s.mean_x();
    let j = merit_j(problem, &xb);
    let d = s.disagreement();
    let gbar = mean(&s.grads);
    SonataRecord {
        round,
        messages: 2 * round,
        j,
        d,
        m: (j * j).max(d * d),
        mean_objective: problem.value(&xb),
        stepsize,
        consensus_err_x: s.x.iter().map(|v| dist2(v, &xb)).fold(0.0, f64::max),
        tracking_err_y: s.y.iter().map(|v| dist2(v, &gbar)).fold(0.0, f64::max),
        tracking_drift: s.tracking_drift(),
    }
}

fn feasible<P: CompositeProblem + ?Sized>(problem: &P, x: &[f64]) -> bool {
    let mut p = x.to_vec();
    problem.project(&mut p);
    let d: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
    norm_inf(&d) <= 1e-12 * norm_inf(x).max(1.0)
}

/// Run SONATA from per-agent feasible points `x0`.
pub fn sonata_run<A, P>(agents: &[A], problem: &P, cfg: &SonataConfig, x0: Vec<Vec<f64>>) -> Result<SonataResult>
where
    A: AgentProblem,
    P: CompositeProblem + ?Sized,
{
    let state = SonataState::new(agents, x0)?;
    sonata_run_from(agents, problem, cfg, state)
}

/// Run SONATA from an arbitrary state, e.g. one with exact tracking already in place.
pub fn sonata_run_from<A, P>(agents: &[A], problem: &P, cfg: &SonataConfig, mut state: SonataState) -> Result<SonataResult>
where
    A: AgentProblem,
    P: CompositeProblem + ?Sized,
{
    if cfg.graph.nodes() != agents.len() {
        bail!(Config, "graph has {} nodes for {} agents", cfg.graph.nodes(), agents.len());
    }
    if agents.first().is_some_and(|a| a.dim() != problem.dim()) {
        bail!(Domain, "agents and the shared problem disagree on the dimension");
    }
    if !(cfg.tol >= 0.0) {
        bail!(Config, "tol must be nonnegative");
    }
    if cfg.schedule.is_armijo() {
        bail!(Config, "SONATA takes a predetermined step-size");
    }
    if let ScheduleKind::Constant(g) = cfg.schedule.kind() {
        log::warn!("constant step-size {g}: convergence requires it to be sufficiently small");
    }
    if state.agents() != agents.len() || state.phi.iter().any(|p| !(*p > 0.0)) {
        bail!(Domain, "state does not match the agents or has nonpositive weights");
    }
    if let Some(i) = state.x.iter().position(|x| !feasible(problem, x)) {
        bail!(Domain, "initial point of agent {i} is infeasible");
    }
    let exec = Executor::new(cfg.workers)?;
    let n = agents.len();
    let mut schedule = cfg.schedule.clone();
    if cfg.variant.x == Combine::Caa && !unconstrained(problem, &state.x[0]) {
        bail!(Config, "CAA x-updates need X = ℝᵐ and G = 0");
    }

    let mut trace = vec![record(problem, &state, 0, f64::NAN)];
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(state.x.clone());
    }
    let done = |m: f64| cfg.tol > 0.0 && m <= cfg.tol;
    let mut stop = if done(trace[0].m) { SonataStop::Converged } else { SonataStop::MaxIters };
    let mut k = 0;
    while stop == SonataStop::MaxIters && k < cfg.max_iters {
        let gamma = schedule.current();
        let a = build_weights(&cfg.graph.step(k), cfg.rule)?;
        let halves: Vec<Vec<f64>> = exec.try_map(n, |i| {
            sonata_local_step(&agents[i], &state.x[i], &state.y[i], &state.grads[i], n, gamma).map(|(_, h)| h)
        })?;
        state = sonata_communicate(&state, &a, &halves, agents, cfg.variant, &exec)?;
        if !state.x.iter().chain(&state.y).all(|v| v.iter().all(|s| s.is_finite())) {
            bail!(Numerical, "non-finite iterate at iteration {k}");
        }
        schedule.next_stepsize();
        k += 1;
        let rec = record(problem, &state, k, gamma);
        if cfg.record_iterates {
            iterates.push(state.x.clone());
        }
        if done(rec.m) {
            stop = SonataStop::Converged;
        }
        trace.push(rec);
    }
    Ok(SonataResult { state, trace, iterates, stop })
}

/// `G = 0` and `X = ℝᵐ`, probed by projecting a far-away point.
fn unconstrained<P: CompositeProblem + ?Sized>(problem: &P, x: &[f64]) -> bool {
    if !problem.g_is_zero() {
        return false;
    }
    let probe: Vec<f64> = x.iter().map(|v| v + 1e6).collect();
    let mut p = probe.clone();
    problem.project(&mut p);
    p == probe
}
