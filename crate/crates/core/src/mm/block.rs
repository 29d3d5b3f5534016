//! Block-MM with cyclic, max-improvement and random block selection.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_descent, should_stop, ChainRecord, MmConfig, MmTrace, StopReason};
use crate::base::merit::{iterate_delta, relative_descent, MeritReport};
use crate::base::partition::BlockPartition;
use crate::error::{bail, Result};
use crate::linalg::all_finite;

/// Per-block majorizers `Ṽᵢ(xᵢ | xᵏ)`.
pub trait BlockMmProblem {
    fn objective(&self, x: &[f64]) -> f64;

    /// `Ṽᵢ(xᵢ | base)` if it can be evaluated.
    fn block_surrogate_value(&self, _i: usize, _xi: &[f64], _base: &[f64]) -> Option<f64> {
        None
    }

    /// A global minimizer of `Ṽᵢ(· | base)` over `Xᵢ`.
    fn minimize_block(&self, i: usize, base: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockRule {
    /// Blocks in index order; every block appears in any window of `period ≥ n` iterations.
    Cyclic { period: usize },
    /// The block whose surrogate minimum is lowest; ties go to the lowest index.
    MaxImprovement,
    /// Uniform draws; requires `p_min ≤ 1/n`.
    Random { p_min: f64, seed: u64 },
}

impl BlockRule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            BlockRule::Cyclic { period } if period < n => {
                bail!(Config, "cyclic period {period} is shorter than the block count {n}")
            }
            BlockRule::Random { p_min, .. } if !(p_min > 0.0 && p_min <= 1.0 / n as f64) => {
                bail!(Config, "p_min must lie in (0, 1/n], got {p_min}")
            }
            _ => Ok(()),
        }
    }
}

/// Block-MM trace: the common MM trace plus the block chosen at each iteration.
#[derive(Debug, Clone)]
pub struct BlockMmTrace {
    pub trace: MmTrace,
    pub selected: Vec<usize>,
}

pub fn block_mm_minimize<P: BlockMmProblem + ?Sized>(
    problem: &P,
    partition: &BlockPartition,
    rule: BlockRule,
    x0: &[f64],
    config: &MmConfig,
) -> Result<BlockMmTrace> {
    config.validate()?;
    let n = partition.len();
    rule.validate(n)?;
    if x0.len() != partition.total() {
        bail!(Domain, "x0 has length {}, partition covers {}", x0.len(), partition.total());
    }
    let mut rng = match rule {
        BlockRule::Random { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut x = x0.to_vec();
    let mut v = problem.objective(&x);
    let mut trace = MmTrace {
        x: Vec::new(),
        iterates: Vec::new(),
        reports: Vec::new(),
        chain: Vec::new(),
        stop: StopReason::MaxIters,
    };
    let mut selected = Vec::new();
    if config.record_iterates {
        trace.iterates.push(x.clone());
    }
    // A full pass with no progress is required before stopping, so that one
    // already-optimal block does not end the run.
    let mut quiet_streak = 0usize;
    for k in 0..config.max_iters {
        let (i, xi) = match rule {
            BlockRule::Cyclic { .. } => (k % n, problem.minimize_block(k % n, &x)?),
            BlockRule::Random { .. } => {
                let i = rng.as_mut().expect("seeded").gen_range(0..n);
                (i, problem.minimize_block(i, &x)?)
            }
            BlockRule::MaxImprovement => {
                let mut best: Option<(usize, Vec<f64>, f64)> = None;
                for i in 0..n {
                    let xi = problem.minimize_block(i, &x)?;
                    let score = match problem.block_surrogate_value(i, &xi, &x) {
                        Some(s) => s,
                        None => {
                            let mut trial = x.clone();
                            trial[partition.range(i)].copy_from_slice(&xi);
                            problem.objective(&trial)
                        }
                    };
                    if best.as_ref().is_none_or(|b| score < b.2) {
                        best = Some((i, xi, score));
                    }
                }
                let (i, xi, _) = best.expect("at least one block");
                (i, xi)
            }
        };
        if !all_finite(&xi) {
            bail!(Numerical, "block {i} minimizer is not finite");
        }
        let mut next = x.clone();
        next[partition.range(i)].copy_from_slice(&xi);
        let v_next = problem.objective(&next);
        check_descent(config, v, v_next)?;
        let sur = problem.block_surrogate_value(i, &xi, &x).unwrap_or(v_next);
        trace.chain.push(ChainRecord { v_prev: v, surrogate_new: sur, v_new: v_next });
        let rd = relative_descent(v, v_next);
        let delta = iterate_delta(&x, &next);
        trace.reports.push(MeritReport {
            objective: v_next,
            fixed_point_residual: delta,
            relative_descent: rd,
            iterate_delta: delta,
        });
        selected.push(i);
        x = next;
        v = v_next;
        if config.record_iterates {
            trace.iterates.push(x.clone());
        }
        let single_block_stop = matches!(rule, BlockRule::MaxImprovement);
        match should_stop(config, rd, delta) {
            Some(reason) => {
                quiet_streak += 1;
                if single_block_stop || quiet_streak >= n {
                    trace.stop = reason;
                    break;
                }
            }
            None => quiet_streak = 0,
        }
    }
    trace.x = x;
    Ok(BlockMmTrace { trace, selected })
}
