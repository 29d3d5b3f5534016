//! Block selection rules, random samplings and error-bound functions.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::base::problem::CompositeProblem;
use crate::error::{bail, Result};
use crate::linalg::dist2;

#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Each block independently with probability `p`; an empty draw is redrawn.
    Uniform { p: f64 },
    /// Draw a size `s` with probability `q[s − 1]`, then `s` distinct blocks uniformly.
    DoublyUniform { q: Vec<f64> },
    /// One part of a partition of the blocks, chosen uniformly.
    NonoverlappingUniform { parts: Vec<Vec<usize>> },
    /// Exactly `tau` distinct blocks, uniformly.
    Nice { tau: usize },
    /// A single block, uniformly.
    Sequential,
    FullyParallel,
}

impl Sampling {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Sampling::Uniform { p } if !(*p > 0.0 && *p <= 1.0) => bail!(Config, "uniform sampling needs p in (0,1]"),
            Sampling::DoublyUniform { q } => {
                if q.len() != n || q.iter().any(|v| !(*v >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    bail!(Config, "doubly uniform sampling needs a distribution over sizes 1..={n}");
                }
            }
            Sampling::NonoverlappingUniform { parts } => check_partition(parts, n)?,
            Sampling::Nice { tau } if *tau == 0 || *tau > n => bail!(Config, "nice sampling needs 1 <= tau <= {n}"),
            _ => {}
        }
        Ok(())
    }

    /// Lower bound on `P(i ∈ S)` over all blocks.
    pub fn p_min(&self, n: usize) -> f64 {
        match self {
            Sampling::Uniform { p } => *p,
            Sampling::DoublyUniform { q } => q.iter().enumerate().map(|(s, qs)| qs * (s + 1) as f64).sum::<f64>() / n as f64,
            Sampling::NonoverlappingUniform { parts } => 1.0 / parts.len() as f64,
            Sampling::Nice { tau } => *tau as f64 / n as f64,
            Sampling::Sequential => 1.0 / n as f64,
            Sampling::FullyParallel => 1.0,
        }
    }
}

/// Check that `parts` partitions `0..n`.
pub fn check_partition(parts: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for part in parts {
        if part.is_empty() {
            bail!(Config, "partition has an empty part");
        }
        for &i in part {
            if i >= n {
                bail!(Config, "block index {i} out of range 0..{n}");
            }
            if seen[i] {
                bail!(Config, "block {i} appears in two parts");
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        bail!(Config, "block {i} is not covered by the partition");
    }
    Ok(())
}

/// Draw a block set; the result is sorted.
pub fn sample_blocks(sampling: &Sampling, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    sampling.validate(n)?;
    let mut s = match sampling {
        Sampling::Uniform { p } => loop {
            let s: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < *p).collect();
            if !s.is_empty() {
                break s;
            }
        },
        Sampling::DoublyUniform { q } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut size = n;
            for (s, qs) in q.iter().enumerate() {
                acc += qs;
                if u < acc {
                    size = s + 1;
                    break;
                }
            }
            sample(rng, n, size).into_vec()
        }
        Sampling::NonoverlappingUniform { parts } => parts[rng.gen_range(0..parts.len())].clone(),
        Sampling::Nice { tau } => sample(rng, n, *tau).into_vec(),
        Sampling::Sequential => vec![rng.gen_range(0..n)],
        Sampling::FullyParallel => (0..n).collect(),
    };
    s.sort_unstable();
    Ok(s)
}

/// `{i : Eᵢ ≥ ρ·maxⱼ Eⱼ}` over the indices `pool`, with `e[k]` the bound for `pool[k]`.
pub fn greedy_select(pool: &[usize], e: &[f64], rho: f64) -> Result<Vec<usize>> {
    if !(rho > 0.0 && rho <= 1.0) {
        bail!(Config, "rho must lie in (0,1], got {rho}");
    }
    let max = e.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        bail!(Numerical, "no finite error bound in the pool");
    }
    Ok(pool.iter().zip(e).filter(|(_, v)| **v >= rho * max).map(|(i, _)| *i).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorBound {
    /// `‖x̂ᵢ(x) − xᵢ‖`.
    Displacement,
    /// `‖prox_{gᵢ}(xᵢ − ∇ᵢF(x)) − xᵢ‖`, which is the projected-gradient residual when `G ≡ 0`.
    ProxGradient,
}

/// `Eᵢ(x)` given the block gradient and, for [`ErrorBound::Displacement`], the best response.
pub fn error_bound<P: CompositeProblem>(
    problem: &P,
    kind: ErrorBound,
    block: Range<usize>,
    x: &[f64],
    grad_block: &[f64],
    xhat: Option<&[f64]>,
) -> Result<f64> {
    let xi = &x[block.clone()];
    match (kind, xhat) {
        (ErrorBound::Displacement, Some(h)) => Ok(dist2(h, xi)),
        (ErrorBound::Displacement, None) => bail!(Contract, "displacement bound needs the best response"),
        (ErrorBound::ProxGradient, _) => {
            if !problem.g_separable() {
                bail!(Contract, "no error bound is available for nonseparable G; pass the best response");
            }
            let v: Vec<f64> = xi.iter().zip(grad_block).map(|(a, g)| a - g).collect();
            let mut out = vec![0.0; v.len()];
            problem.prox_block(block, &v, 1.0, &mut out);
            Ok(dist2(&out, xi))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionRule {
    All,
    /// At iteration `k`, blocks `i` with `i ≡ k (mod T)`; every block is visited within `T` iterations.
    EssentiallyCyclic { period: usize },
    Greedy { rho: f64, bound: ErrorBound },
    Random(Sampling),
    RandomGreedy { sampling: Sampling, rho: f64, bound: ErrorBound },
}

impl SelectionRule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            SelectionRule::EssentiallyCyclic { period } if *period == 0 || *period > n => {
                bail!(Config, "cyclic period must lie in 1..={n}")
            }
            SelectionRule::Greedy { rho, .. } | SelectionRule::RandomGreedy { rho, .. } if !(*rho > 0.0 && *rho <= 1.0) => {
                bail!(Config, "rho must lie in (0,1]")
            }
            SelectionRule::Random(s) | SelectionRule::RandomGreedy { sampling: s, .. } => s.validate(n),
            _ => Ok(()),
        }
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self, SelectionRule::EssentiallyCyclic { .. })
    }

    /// The candidate pool at iteration `k`.
    pub fn pool(&self, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        match self {
            SelectionRule::All | SelectionRule::Greedy { .. } => Ok((0..n).collect()),
            SelectionRule::EssentiallyCyclic { period } => Ok((0..n).filter(|i| i % period == k % period).collect()),
            SelectionRule::Random(s) | SelectionRule::RandomGreedy { sampling: s, .. } => sample_blocks(s, n, rng),
        }
    }

    /// Greedy parameters, if the rule thresholds error bounds.
    pub fn greedy(&self) -> Option<(f64, ErrorBound)> {
        match self {
            SelectionRule::Greedy { rho, bound } | SelectionRule::RandomGreedy { rho, bound, .. } => Some((*rho, *bound)),
            _ => None,
        }
    }
}
