//! Hybrid schemes: each worker sweeps its own blocks Gauss-Seidel style while workers run
//! Jacobi style against the iteration-start snapshot.

use alloc::vec;
use alloc::vec::Vec;

use super::engine::{
    check_common, epsilon_at, inexact_point, FlexaConfig, FlexaResult, FlexaStop, InexactPolicy, Recorder, TauState,
};
use super::selection::{check_partition, error_bound, greedy_select, ErrorBound};
use super::surrogate::SurrogateFamily;
use crate::base::partition::BlockPartition;
use crate::base::problem::CompositeProblem;
use crate::base::schedule::Schedule;
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::linalg::dist2;

/// Block updates of one worker sweep and its largest displacement.
type SweepOutcome = (Vec<(usize, Vec<f64>)>, f64);

/// Each worker `p` sweeps its blocks `I_p` in order; other workers' blocks stay at `xᵏ`.
#[allow(clippy::too_many_arguments)]
pub fn flexa_parallel_cyclic<P, S>(
    problem: &P,
    partition: &BlockPartition,
    surrogates: &S,
    worker_partition: &[Vec<usize>],
    schedule: Schedule,
    inexact: &InexactPolicy,
    x0: &[f64],
    cfg: &FlexaConfig,
) -> Result<FlexaResult>
where
    P: CompositeProblem,
    S: SurrogateFamily<P>,
{
    hybrid(problem, partition, surrogates, worker_partition, None, schedule, inexact, x0, cfg)
}

/// As [`flexa_parallel_cyclic`], but worker `p` only sweeps `{i ∈ I_p : Eᵢ(xᵏ) ≥ ρ·maxⱼ Eⱼ(xᵏ)}`.
#[allow(clippy::too_many_arguments)]
pub fn flexa_parallel_greedy_cyclic<P, S>(
    problem: &P,
    partition: &BlockPartition,
    surrogates: &S,
    worker_partition: &[Vec<usize>],
    rho: f64,
    bound: ErrorBound,
    schedule: Schedule,
    inexact: &InexactPolicy,
    x0: &[f64],
    cfg: &FlexaConfig,
) -> Result<FlexaResult>
where
    P: CompositeProblem,
    S: SurrogateFamily<P>,
{
    hybrid(problem, partition, surrogates, worker_partition, Some((rho, bound)), schedule, inexact, x0, cfg)
}

#[allow(clippy::too_many_arguments)]
fn hybrid<P, S>(
    problem: &P,
    partition: &BlockPartition,
    surrogates: &S,
    workers: &[Vec<usize>],
    greedy: Option<(f64, ErrorBound)>,
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
    check_partition(workers, n)?;
    if schedule.is_armijo() {
        bail!(Config, "hybrid schemes take a predetermined step-size, not a line search");
    }
    if let Some((rho, _)) = greedy {
        if !(rho > 0.0 && rho <= 1.0) {
            bail!(Config, "rho must lie in (0,1], got {rho}");
        }
    }
    let mut taus = TauState::new(&cfg.tau, n)?;
    let exec = Executor::new(cfg.workers)?;

    let mut x = x0.to_vec();
    let mut v = problem.value(&x);
    let mut rec = Recorder::new(cfg, &x, v);
    let mut stop = if rec.target_reached(v) { FlexaStop::TargetReached } else { FlexaStop::MaxIters };

    let mut k = 0;
    while stop == FlexaStop::MaxIters && k < cfg.max_iters {
        let cache = surrogates.prepare(problem, &x);
        let gamma = if problem.g_separable() { schedule.current() } else { schedule.capped(1.0 / n as f64) };
        let eps = epsilon_at(inexact, k);

        let sweeps: Vec<Vec<usize>> = match greedy {
            None => workers.to_vec(),
            Some((rho, bound)) => {
                let e: Vec<f64> = exec.try_map(n, |i| {
                    let r = partition.range(i);
                    let mut xhat = vec![0.0; r.len()];
                    surrogates.best_response(problem, &cache, &x, r.clone(), taus.tau(i), &mut xhat);
                    let mut grad = vec![0.0; r.len()];
                    surrogates.block_gradient(problem, &cache, &x, r.clone(), &mut grad);
                    error_bound(problem, bound, r, &x, &grad, Some(&xhat))
                })?;
                if bound == ErrorBound::Displacement && e.iter().copied().fold(0.0, f64::max) <= cfg.stop_tol {
                    stop = FlexaStop::Stationary;
                    break;
                }
                let all: Vec<usize> = (0..n).collect();
                let chosen = greedy_select(&all, &e, rho)?;
                workers.iter().map(|ip| ip.iter().copied().filter(|i| chosen.contains(i)).collect()).collect()
            }
        };

        let taus_ref = &taus;
        let outcomes: Vec<SweepOutcome> = exec.try_map(sweeps.len(), |p| {
            let mut xl = x.clone();
            let mut cl = cache.clone();
            let mut out = Vec::with_capacity(sweeps[p].len());
            let mut disp: f64 = 0.0;
            for &i in &sweeps[p] {
                let r = partition.range(i);
                let mut xhat = vec![0.0; r.len()];
                surrogates.best_response(problem, &cl, &xl, r.clone(), taus_ref.tau(i), &mut xhat);
                disp = disp.max(dist2(&xhat, &xl[r.clone()]));
                let z = inexact_point(problem, surrogates, &xl, r.clone(), taus_ref.tau(i), &xhat, eps, inexact.descent_check)?;
                let old = xl[r.clone()].to_vec();
                for ((xj, zj), oj) in xl[r.clone()].iter_mut().zip(&z).zip(&old) {
                    *xj = oj + gamma * (zj - oj);
                }
                surrogates.update_cache(problem, &mut cl, &xl, r.clone(), &old);
                out.push((i, xl[r].to_vec()));
            }
            Ok((out, disp))
        })?;

        let mut x_new = x.clone();
        let mut residual: f64 = 0.0;
        let mut selected = 0;
        for (blocks, disp) in &outcomes {
            residual = residual.max(*disp);
            selected += blocks.len();
            for (i, b) in blocks {
                x_new[partition.range(*i)].copy_from_slice(b);
            }
        }
        if !x_new.iter().all(|v| v.is_finite()) {
            bail!(Numerical, "non-finite iterate at iteration {k}");
        }
        let v_new = problem.value(&x_new);
        let moved = x_new != x;
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
        rec.push(k, &x_prev, &x, v_prev, v, residual, gamma, selected, taus.scale, accepted);
        if rec.target_reached(v) {
            stop = FlexaStop::TargetReached;
        } else if greedy.is_none() && accepted && residual <= cfg.stop_tol {
            stop = FlexaStop::Stationary;
        }
    }

    Ok(FlexaResult { x, trace: rec.trace, iterates: rec.iterates, stop, tau_changes: taus.changes })
}
