//! The Jacobi FLEXA engine and the pieces it shares with the hybrid schemes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::selection::{error_bound, ErrorBound, Sampling, SelectionRule};
use super::surrogate::SurrogateFamily;
use crate::base::linesearch::armijo_linesearch;
use crate::base::merit::{iterate_delta, relative_descent, relative_error, MeritReport};
use crate::base::partition::BlockPartition;
use crate::base::problem::CompositeProblem;
use crate::base::schedule::{Schedule, ScheduleKind, SeqFn};
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::linalg::{dist2, dot, norm_inf};

/// Proximal weights `τᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub enum TauPolicy {
    Uniform(f64),
    PerBlock(Vec<f64>),
    /// Uniform `τ`, doubled when the objective fails to decrease (the step is then discarded)
    /// and halved after ten consecutive decreases or once `re(x) ≤ 10⁻²`.
    Adaptive { initial: f64, max_changes: usize },
}

impl TauPolicy {
    /// The usual adaptive policy with at most 100 changes.
    pub fn adaptive(initial: f64) -> Self {
        TauPolicy::Adaptive { initial, max_changes: 100 }
    }
}

/// Accuracy of the block solves: `‖zᵢᵏ − x̂ᵢ(xᵏ)‖ ≤ εᵏ`.
#[derive(Clone, Default)]
pub struct InexactPolicy {
    /// `k ↦ εᵏ`; `None` means exact solves.
    pub epsilon: Option<SeqFn>,
    /// Reject any `zᵢ` that increases `F̃ᵢ(·|xᵏ) + gᵢ` relative to `xᵢᵏ`.
    pub descent_check: bool,
}

impl fmt::Debug for InexactPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InexactPolicy")
            .field("epsilon", &self.epsilon.as_ref().map(|_| "fn"))
            .field("descent_check", &self.descent_check)
            .finish()
    }
}

impl InexactPolicy {
    pub fn exact() -> Self {
        Self::default()
    }

    /// `εᵏ = c / k`, checked for descent.
    pub fn harmonic(c: f64) -> Self {
        Self { epsilon: Some(alloc::sync::Arc::new(move |k| c / k as f64)), descent_check: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexaConfig {
    pub max_iters: usize,
    /// Stop once every block satisfies `‖x̂ᵢ(xᵏ) − xᵢᵏ‖ ≤ stop_tol`.
    pub stop_tol: f64,
    pub tau: TauPolicy,
    /// Known optimal value, used for `re(x)`.
    pub v_star: Option<f64>,
    /// Stop once `re(x) ≤ target_re`; needs `v_star`.
    pub target_re: Option<f64>,
    /// Threads used for the block solves.
    pub workers: usize,
    pub seed: u64,
    pub record_iterates: bool,
}

impl Default for FlexaConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            stop_tol: 1e-8,
            tau: TauPolicy::Uniform(1.0),
            v_star: None,
            target_re: None,
            workers: 1,
            seed: 0,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexaStop {
    Stationary,
    TargetReached,
    MaxIters,
}

/// State after iteration `iteration`; record 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexaRecord {
    pub iteration: usize,
    /// `fixed_point_residual` is the largest best-response displacement seen in the iteration.
    pub merit: MeritReport,
    /// `re(x)`, or NaN when `V*` is unknown.
    pub re: f64,
    pub stepsize: f64,
    pub selected: usize,
    pub tau_scale: f64,
    /// False when an adaptive-τ increase discarded the step.
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct FlexaResult {
    pub x: Vec<f64>,
    pub trace: Vec<FlexaRecord>,
    pub iterates: Vec<Vec<f64>>,
    pub stop: FlexaStop,
    pub tau_changes: usize,
}

impl FlexaResult {
    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.merit.objective)
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.iteration)
    }
}

pub(crate) struct TauState {
    base: Vec<f64>,
    pub(crate) scale: f64,
    max_changes: Option<usize>,
    pub(crate) changes: usize,
    streak: usize,
    re_halved: bool,
}

impl TauState {
    pub(crate) fn new(policy: &TauPolicy, n: usize) -> Result<Self> {
        let (base, max_changes) = match policy {
            TauPolicy::Uniform(t) => (vec![*t; n], None),
            TauPolicy::PerBlock(v) => {
                if v.len() != n {
                    bail!(Config, "expected {n} proximal weights, got {}", v.len());
                }
                (v.clone(), None)
            }
            TauPolicy::Adaptive { initial, max_changes } => (vec![*initial; n], Some(*max_changes)),
        };
        if base.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            bail!(Config, "proximal weights must be positive and finite");
        }
        Ok(Self { base, scale: 1.0, max_changes, changes: 0, streak: 0, re_halved: false })
    }

    pub(crate) fn tau(&self, i: usize) -> f64 {
        self.base[i] * self.scale
    }

    fn can_change(&self) -> bool {
        self.max_changes.is_some_and(|m| self.changes < m)
    }

    /// Update after a trial step; returns whether the step is kept.
    pub(crate) fn after_step(&mut self, v_old: f64, v_new: f64, moved: bool, re_new: f64) -> bool {
        if self.max_changes.is_none() || !moved {
            return true;
        }
        if !(v_new < v_old) {
            if self.can_change() {
                self.scale *= 2.0;
                self.changes += 1;
                self.streak = 0;
                return false;
            }
            return true;
        }
        self.streak += 1;
        let re_trigger = !self.re_halved && re_new <= 1e-2;
        if (self.streak >= 10 || re_trigger) && self.can_change() {
            self.scale *= 0.5;
            self.changes += 1;
            self.streak = 0;
            self.re_halved |= re_trigger;
        }
        true
    }
}

/// `gᵢ(z)` when `G` is separable, otherwise `G(z, x₋ᵢ)`.
pub(crate) fn g_with_block<P: CompositeProblem + ?Sized>(p: &P, x: &[f64], block: Range<usize>, z: &[f64]) -> f64 {
    if p.g_separable() {
        p.eval_g_block(block, z)
    } else {
        let mut y = x.to_vec();
        y[block].copy_from_slice(z);
        p.eval_g(&y)
    }
}

/// Move `x̂ᵢ` towards `xᵢ` by at most `ε` and optionally check the surrogate descent.
#[allow(clippy::too_many_arguments)]
pub fn inexact_point<P: CompositeProblem, S: SurrogateFamily<P>>(
    p: &P,
    fam: &S,
    x: &[f64],
    block: Range<usize>,
    tau: f64,
    xhat: &[f64],
    eps: f64,
    descent_check: bool,
) -> Result<Vec<f64>> {
    let xi = &x[block.clone()];
    let mut z = xhat.to_vec();
    let d = dist2(xhat, xi);
    if eps > 0.0 && d > 0.0 {
        let t = (eps / d).min(1.0);
        for (zj, xj) in z.iter_mut().zip(xi) {
            *zj += t * (xj - *zj);
        }
    }
    if descent_check {
        let hz = fam.value(p, x, block.clone(), tau, &z) + g_with_block(p, x, block.clone(), &z);
        let hx = fam.value(p, x, block.clone(), tau, xi) + g_with_block(p, x, block.clone(), xi);
        if !(hz <= hx + 1e-12 * (1.0 + hx.abs())) {
            bail!(Contract, "inexact block solve increased the surrogate: {hz} > {hx}");
        }
    }
    Ok(z)
}

pub(crate) fn epsilon_at(inexact: &InexactPolicy, k: usize) -> f64 {
    inexact.epsilon.as_ref().map_or(0.0, |e| e(k + 1))
}

pub(crate) fn check_common<P: CompositeProblem>(p: &P, partition: &BlockPartition, x0: &[f64], cfg: &FlexaConfig) -> Result<()> {
    if partition.total() != p.dim() || x0.len() != p.dim() {
        bail!(Config, "dimension mismatch: problem {}, partition {}, x0 {}", p.dim(), partition.total(), x0.len());
    }
    if cfg.target_re.is_some() && cfg.v_star.is_none() {
        bail!(Config, "target_re needs v_star");
    }
    if !(cfg.stop_tol >= 0.0) {
        bail!(Config, "stop_tol must be nonnegative");
    }
    Ok(())
}

/// `‖x − prox_G(x − ∇F(x))‖∞`, the merit that replaces `re(x)` when `V*` is unknown.
pub fn prox_residual_inf<P: CompositeProblem + ?Sized>(p: &P, x: &[f64]) -> f64 {
    let m = p.dim();
    let mut g = vec![0.0; m];
    p.grad_f(x, &mut g);
    let v: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
    let mut out = vec![0.0; m];
    p.prox_block(0..m, &v, 1.0, &mut out);
    let d: Vec<f64> = out.iter().zip(x).map(|(a, b)| a - b).collect();
    norm_inf(&d)
}

/// Bookkeeping shared by every FLEXA variant.
pub(crate) struct Recorder<'a> {
    cfg: &'a FlexaConfig,
    pub(crate) trace: Vec<FlexaRecord>,
    pub(crate) iterates: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(cfg: &'a FlexaConfig, x0: &[f64], v0: f64) -> Self {
        let mut r = Self { cfg, trace: Vec::new(), iterates: Vec::new() };
        r.trace.push(FlexaRecord {
            iteration: 0,
            merit: MeritReport { objective: v0, fixed_point_residual: f64::NAN, relative_descent: 0.0, iterate_delta: 0.0 },
            re: r.re(v0),
            stepsize: f64::NAN,
            selected: 0,
            tau_scale: 1.0,
            accepted: true,
        });
        if cfg.record_iterates {
            r.iterates.push(x0.to_vec());
        }
        r
    }

    pub(crate) fn re(&self, v: f64) -> f64 {
        self.cfg.v_star.map_or(f64::NAN, |vs| relative_error(v, vs))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(
        &mut self,
        k: usize,
        x_prev: &[f64],
        x: &[f64],
        v_prev: f64,
        v: f64,
        residual: f64,
        stepsize: f64,
        selected: usize,
        tau_scale: f64,
        accepted: bool,
    ) {
        self.trace.push(FlexaRecord {
            iteration: k,
            merit: MeritReport {
                objective: v,
                fixed_point_residual: residual,
                relative_descent: relative_descent(v_prev, v),
                iterate_delta: iterate_delta(x_prev, x),
            },
            re: self.re(v),
            stepsize,
            selected,
            tau_scale,
            accepted,
        });
        if self.cfg.record_iterates {
            self.iterates.push(x.to_vec());
        }
    }

    pub(crate) fn target_reached(&self, v: f64) -> bool {
        match self.cfg.target_re {
            Some(t) => self.re(v) <= t,
            None => false,
        }
    }

    /// The merit read by the guarded step-size rule.
    pub(crate) fn schedule_merit<P: CompositeProblem>(&self, p: &P, schedule: &Schedule, x: &[f64], v: f64) -> f64 {
        if !matches!(schedule.kind(), ScheduleKind::Guarded { .. }) {
            return f64::INFINITY;
        }
        match self.cfg.v_star {
            Some(_) => self.re(v),
            None => prox_residual_inf(p, x),
        }
    }
}

struct Candidate {
    xhat: Vec<f64>,
    grad: Vec<f64>,
    disp: f64,
    bound: f64,
}

/// FLEXA with Jacobi updates: selected blocks move towards best responses computed at `xᵏ`.
#[allow(clippy::too_many_arguments)]
pub fn flexa_run<P, S>(
    problem: &P,
    partition: &BlockPartition,
    surrogates: &S,
    select: &SelectionRule,
    mut schedule: Schedule,
    inexact: &InexactPolicy,
    x0: &[f64],
    cfg: &FlexaConfig,
) -> Result<FlexaResult>
where
    P: CompositeProblem,
    S: SurrogateFamily<P>,
{
    check_common(problem, partition, x0, cfg)?;
    let n = partition.len();
    select.validate(n)?;
    let mut taus = TauState::new(&cfg.tau, n)?;
    let exec = Executor::new(cfg.workers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let separable = problem.g_separable();
    let armijo = match schedule.kind() {
        ScheduleKind::Armijo { alpha, delta, gamma0 } => Some((*alpha, *delta, *gamma0)),
        _ => None,
    };
    let greedy = select.greedy();

    let mut x = x0.to_vec();
    let mut v = problem.value(&x);
    let mut rec = Recorder::new(cfg, &x, v);
    let mut stop = FlexaStop::MaxIters;
    if rec.target_reached(v) {
        stop = FlexaStop::TargetReached;
    }

    let mut k = 0;
    while stop == FlexaStop::MaxIters && k < cfg.max_iters {
        let cache = surrogates.prepare(problem, &x);
        let pool = select.pool(n, k, &mut rng)?;
        let bound_kind = greedy.map_or(ErrorBound::Displacement, |g| g.1);

        let cands: Vec<Candidate> = exec.try_map(pool.len(), |j| {
            let i = pool[j];
            let r = partition.range(i);
            let mut xhat = vec![0.0; r.len()];
            surrogates.best_response(problem, &cache, &x, r.clone(), taus.tau(i), &mut xhat);
            let mut grad = vec![0.0; r.len()];
            surrogates.block_gradient(problem, &cache, &x, r.clone(), &mut grad);
            let disp = dist2(&xhat, &x[r.clone()]);
            let bound = match bound_kind {
                ErrorBound::Displacement => disp,
                _ => error_bound(problem, bound_kind, r, &x, &grad, Some(&xhat))?,
            };
            Ok(Candidate { xhat, grad, disp, bound })
        })?;
        if cands.iter().any(|c| !c.xhat.iter().all(|v| v.is_finite())) {
            bail!(Numerical, "non-finite best response at iteration {k}");
        }
        let residual = cands.iter().map(|c| c.disp).fold(0.0, f64::max);
        if pool.len() == n && residual <= cfg.stop_tol {
            stop = FlexaStop::Stationary;
            break;
        }

        let chosen: Vec<usize> = match greedy {
            Some((rho, _)) => {
                let e: Vec<f64> = cands.iter().map(|c| c.bound).collect();
                let s = super::selection::greedy_select(&pool, &e, rho)?;
                s.iter().map(|i| pool.binary_search(i).expect("selected from pool")).collect()
            }
            None => (0..pool.len()).collect(),
        };

        let eps = epsilon_at(inexact, k);
        let zs: Vec<Vec<f64>> = if eps > 0.0 || inexact.descent_check {
            exec.try_map(chosen.len(), |j| {
                let i = pool[chosen[j]];
                inexact_point(problem, surrogates, &x, partition.range(i), taus.tau(i), &cands[chosen[j]].xhat, eps, inexact.descent_check)
            })?
        } else {
            chosen.iter().map(|&j| cands[j].xhat.clone()).collect()
        };

        let mut d = vec![0.0; x.len()];
        let mut decrease = 0.0;
        for (&j, z) in chosen.iter().zip(&zs) {
            let i = pool[j];
            let r = partition.range(i);
            for ((dj, zj), xj) in d[r.clone()].iter_mut().zip(z).zip(&x[r.clone()]) {
                *dj = zj - xj;
            }
            decrease += dot(&cands[j].grad, &d[r.clone()]);
            if separable && armijo.is_some() {
                decrease += problem.eval_g_block(r.clone(), z) - problem.eval_g_block(r.clone(), &x[r]);
            }
        }

        let gamma = match armijo {
            Some((alpha, delta, gamma0)) => {
                if !separable {
                    let xd: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
                    decrease += problem.eval_g(&xd) - problem.eval_g(&x);
                }
                armijo_linesearch(problem, &x, &d, decrease, alpha, delta, gamma0)?
            }
            None if separable => schedule.current(),
            None => schedule.capped(1.0 / n as f64),
        };

        let x_new: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + gamma * b).collect();
        let v_new = problem.value(&x_new);
        if !v_new.is_finite() {
            bail!(Numerical, "objective became non-finite at iteration {k}");
        }
        let moved = d.iter().any(|v| *v != 0.0);
        let accepted = taus.after_step(v, v_new, moved, rec.re(v_new));
        k += 1;
        let x_prev = core::mem::take(&mut x);
        let v_prev = v;
        if accepted {
            x = x_new;
            v = v_new;
        } else {
            x = x_prev.clone();
        }
        let merit = rec.schedule_merit(problem, &schedule, &x, v);
        schedule.advance_with_merit(merit);
        rec.push(k, &x_prev, &x, v_prev, v, residual, gamma, chosen.len(), taus.scale, accepted);
        if rec.target_reached(v) {
            stop = FlexaStop::TargetReached;
        }
    }

    Ok(FlexaResult { x, trace: rec.trace, iterates: rec.iterates, stop, tau_changes: taus.changes })
}

/// Random pool followed by a greedy threshold within the pool.
#[allow(clippy::too_many_arguments)]
pub fn flexa_random_greedy<P, S>(
    problem: &P,
    partition: &BlockPartition,
    surrogates: &S,
    sampling: Sampling,
    rho: f64,
    schedule: Schedule,
    inexact: &InexactPolicy,
    x0: &[f64],
    cfg: &FlexaConfig,
) -> Result<FlexaResult>
where
    P: CompositeProblem,
    S: SurrogateFamily<P>,
{
    let rule = SelectionRule::RandomGreedy { sampling, rho, bound: ErrorBound::Displacement };
    flexa_run(problem, partition, surrogates, &rule, schedule, inexact, x0, cfg)
}
