//! Time-varying digraphs, weight matrices, and the consensus, push-sum and tracking protocols.
//!
//! Agent-indexed data is stored as one `Vec<f64>` per agent. An edge `(i, j)` points from `i` to `j`;
//! every node is implicitly its own in- and out-neighbour.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::linalg::{compensated_sum, dist2};

/// Tolerance on the stochasticity of a weight matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// One communication graph `Gᵏ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStep {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    out_degrees: Vec<usize>,
}

impl GraphStep {
    /// Self-loops and duplicates are dropped; edges are kept sorted.
    pub fn new(nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if nodes == 0 {
            bail!(Config, "a graph needs at least one node");
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= nodes || j >= nodes {
                bail!(Domain, "edge ({i}, {j}) out of range for {nodes} nodes");
            }
            if i != j {
                set.insert((i, j));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut out_degrees = vec![1; nodes];
        for &(i, _) in &edges {
            out_degrees[i] += 1;
        }
        Ok(Self { nodes, edges, out_degrees })
    }

    /// Directed ring `0 → 1 → … → I−1 → 0`.
    pub fn ring(nodes: usize) -> Result<Self> {
        let edges = if nodes > 1 { (0..nodes).map(|i| (i, (i + 1) % nodes)).collect() } else { Vec::new() };
        Self::new(nodes, edges)
    }

    /// Undirected path `0 - 1 - ... - (I-1)`.
    pub fn path(nodes: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 1..nodes {
            edges.push((i - 1, i));
            edges.push((i, i - 1));
        }
        Self::new(nodes, edges)
    }

    pub fn complete(nodes: usize) -> Result<Self> {
        let edges = (0..nodes).flat_map(|i| (0..nodes).map(move |j| (i, j))).collect();
        Self::new(nodes, edges)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `dⱼ`, counting `j` itself.
    pub fn out_degree(&self, j: usize) -> usize {
        self.out_degrees[j]
    }

    pub fn out_degrees(&self) -> &[usize] {
        &self.out_degrees
    }

    /// `j` can send to `i` in this step (always true for `i = j`).
    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        i == j || self.edges.binary_search(&(j, i)).is_ok()
    }

    /// `N_i^in`, including `i`, sorted.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.nodes).filter(|&j| self.has_edge(j, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(i, j)| self.edges.binary_search(&(j, i)).is_ok())
    }

    /// The undirected closure: every edge gets its reverse.
    pub fn symmetrized(&self) -> Self {
        let edges = self.edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        Self::new(self.nodes, edges).expect("endpoints already validated")
    }

    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.nodes];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for &(a, b) in &self.edges {
                    let (from, to) = if forward { (a, b) } else { (b, a) };
                    if from == u && !seen[to] {
                        seen[to] = true;
                        queue.push_back(to);
                    }
                }
            }
            seen.iter().all(|s| *s)
        };
        reach(true) && reach(false)
    }

    /// Union of the edge sets of several graphs on the same nodes.
    pub fn union(steps: &[GraphStep]) -> Result<Self> {
        let Some(first) = steps.first() else {
            bail!(Config, "union of no graphs");
        };
        if steps.iter().any(|s| s.nodes != first.nodes) {
            bail!(Domain, "graphs disagree on the node count");
        }
        Self::new(first.nodes, steps.iter().flat_map(|s| s.edges.iter().copied()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    Static(GraphStep),
    /// A fresh random ring each step, plus one uniformly drawn extra out-neighbour per node.
    PermutedRingPlusRandom { nodes: usize },
    /// The listed steps, repeated cyclically.
    Custom(Vec<GraphStep>),
}

/// A `B`-strongly connected sequence `{Gᵏ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    kind: GraphKind,
    seed: u64,
    b: usize,
    undirected: bool,
}

impl GraphSequence {
    pub fn fixed(step: GraphStep) -> Result<Self> {
        if !step.is_strongly_connected() {
            bail!(Config, "static graph is not strongly connected");
        }
        Ok(Self { kind: GraphKind::Static(step), seed: 0, b: 1, undirected: false })
    }

    pub fn permuted_ring_plus_random(nodes: usize, seed: u64) -> Result<Self> {
        if nodes == 0 {
            bail!(Config, "a graph needs at least one node");
        }
        Ok(Self { kind: GraphKind::PermutedRingPlusRandom { nodes }, seed, b: 1, undirected: false })
    }

    /// Checks that every window of `b` consecutive steps (cyclically) has a strongly connected union.
    pub fn custom(steps: Vec<GraphStep>, b: usize) -> Result<Self> {
        if steps.is_empty() || b == 0 {
            bail!(Config, "custom sequence needs at least one step and b ≥ 1");
        }
        let n = steps.len();
        for s in 0..n {
            let window: Vec<GraphStep> = (0..b).map(|t| steps[(s + t) % n].clone()).collect();
            if !GraphStep::union(&window)?.is_strongly_connected() {
                bail!(Config, "steps {s}..{} do not form a strongly connected union", s + b);
            }
        }
        Ok(Self { kind: GraphKind::Custom(steps), seed: 0, b, undirected: false })
    }

    /// Replace every generated step by its undirected closure.
    pub fn undirected(mut self) -> Self {
        self.undirected = true;
        self
    }

    pub fn kind(&self) -> &GraphKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The window length `B`.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn nodes(&self) -> usize {
        match &self.kind {
            GraphKind::Static(g) => g.nodes(),
            GraphKind::PermutedRingPlusRandom { nodes } => *nodes,
            GraphKind::Custom(list) => list[0].nodes(),
        }
    }

    /// `Gᵏ`; random generators depend only on `(seed, k)`.
    pub fn step(&self, k: usize) -> GraphStep {
        let g = match &self.kind {
            GraphKind::Static(g) => g.clone(),
            GraphKind::Custom(list) => list[k % list.len()].clone(),
            GraphKind::PermutedRingPlusRandom { nodes } => {
                let n = *nodes;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k as u64);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut edges = Vec::with_capacity(2 * n);
                if n > 1 {
                    for t in 0..n {
                        edges.push((perm[t], perm[(t + 1) % n]));
                    }
                    for j in 0..n {
                        let r = rng.gen_range(0..n - 1);
                        edges.push((j, if r >= j { r + 1 } else { r }));
                    }
                }
                GraphStep::new(n, edges).expect("generated endpoints are in range")
            }
        };
        if self.undirected {
            g.symmetrized()
        } else {
            g
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stochasticity {
    Row,
    Column,
    Doubly,
}

impl Stochasticity {
    pub fn rows(self) -> bool {
        matches!(self, Self::Row | Self::Doubly)
    }

    pub fn columns(self) -> bool {
        matches!(self, Self::Column | Self::Doubly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    Metropolis,
    /// `W = I − λL`.
    Laplacian(f64),
    MaxDegree,
    /// `aᵢⱼ = 1/dⱼ`.
    PushSumOutdegree,
}

/// A nonnegative `I × I` matrix with the stochasticity it was checked for.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    tag: Stochasticity,
}

impl WeightMatrix {
    pub fn new(w: DMatrix<f64>, tag: Stochasticity) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            bail!(Domain, "weight matrix must be square and nonempty");
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            bail!(Config, "weights must be finite and nonnegative");
        }
        let n = w.nrows();
        if tag.rows() {
            for i in 0..n {
                let s = compensated_sum(w.row(i).iter().copied());
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    bail!(Config, "row {i} sums to {s}");
                }
            }
        }
        if tag.columns() {
            for j in 0..n {
                let s = compensated_sum(w.column(j).iter().copied());
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    bail!(Config, "column {j} sums to {s}");
                }
            }
        }
        Ok(Self { w, tag })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn tag(&self) -> Stochasticity {
        self.tag
    }

    pub fn nodes(&self) -> usize {
        self.w.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    /// Smallest positive entry.
    pub fn kappa(&self) -> f64 {
        self.w.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
    }

    /// Nonzeros only on edges of `step` and a positive diagonal.
    pub fn is_compliant(&self, step: &GraphStep) -> bool {
        let n = self.nodes();
        n == step.nodes()
            && (0..n).all(|i| self.w[(i, i)] > 0.0)
            && (0..n).all(|i| (0..n).all(|j| self.w[(i, j)] == 0.0 || step.has_edge(j, i)))
    }
}

/// Build `Wᵏ` (or `Aᵏ`) for one graph.
pub fn build_weights(step: &GraphStep, rule: WeightRule) -> Result<WeightMatrix> {
    let n = step.nodes();
    let d = step.out_degrees();
    if rule != WeightRule::PushSumOutdegree && !step.is_symmetric() {
        bail!(Config, "{rule:?} needs an undirected graph");
    }
    let mut w = DMatrix::zeros(n, n);
    let tag = match rule {
        WeightRule::PushSumOutdegree => {
            for j in 0..n {
                w[(j, j)] = 1.0 / d[j] as f64;
            }
            for &(j, i) in step.edges() {
                w[(i, j)] = 1.0 / d[j] as f64;
            }
            Stochasticity::Column
        }
        WeightRule::Metropolis | WeightRule::MaxDegree | WeightRule::Laplacian(_) => {
            let off = |i: usize, j: usize| match rule {
                WeightRule::Metropolis => 1.0 / d[i].max(d[j]) as f64,
                WeightRule::MaxDegree => 1.0 / n as f64,
                WeightRule::Laplacian(lambda) => lambda,
                WeightRule::PushSumOutdegree => unreachable!(),
            };
            if let WeightRule::Laplacian(lambda) = rule {
                if !(lambda > 0.0) {
                    bail!(Config, "laplacian rule needs lambda > 0, got {lambda}");
                }
            }
            for &(i, j) in step.edges() {
                w[(i, j)] = off(i, j);
            }
            for i in 0..n {
                let s = compensated_sum((0..n).filter(|&j| j != i).map(|j| w[(i, j)]));
                if !(s < 1.0) {
                    bail!(Config, "{rule:?} leaves node {i} without a positive self-weight");
                }
                w[(i, i)] = 1.0 - s;
            }
            Stochasticity::Doubly
        }
    };
    WeightMatrix::new(w, tag)
}

fn check_agents(x: &[Vec<f64>], nodes: usize) -> Result<usize> {
    if x.len() != nodes {
        bail!(Domain, "{} agent vectors for {nodes} nodes", x.len());
    }
    let m = x.first().map_or(0, Vec::len);
    if x.iter().any(|v| v.len() != m) {
        bail!(Domain, "agent vectors differ in length");
    }
    Ok(m)
}

/// `Σᵢ φᵢ xᵢ` coordinate-wise with compensated summation; `φ = None` means all ones.
pub fn weighted_sum(x: &[Vec<f64>], phi: Option<&[f64]>) -> Vec<f64> {
    let m = x.first().map_or(0, Vec::len);
    (0..m)
        .map(|c| compensated_sum(x.iter().enumerate().map(|(i, v)| phi.map_or(1.0, |p| p[i]) * v[c])))
        .collect()
}

/// `xᵢ ← Σⱼ wᵢⱼ xⱼ`.
pub fn consensus_step(x: &[Vec<f64>], w: &WeightMatrix) -> Result<Vec<Vec<f64>>> {
    if !w.tag().rows() {
        bail!(Contract, "consensus needs a row-stochastic matrix, got {:?}", w.tag());
    }
    let m = check_agents(x, w.nodes())?;
    let n = w.nodes();
    Ok((0..n)
        .map(|i| {
            let mut out = vec![0.0; m];
            for (j, xj) in x.iter().enumerate() {
                let a = w.get(i, j);
                if a != 0.0 {
                    out.iter_mut().zip(xj).for_each(|(o, v)| *o += a * v);
                }
            }
            out
        })
        .collect())
}

/// Local vectors `xᵢ` and push-sum weights `φᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushSumState {
    pub x: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

impl PushSumState {
    /// `φ⁰ = 1`.
    pub fn new(x: Vec<Vec<f64>>) -> Result<Self> {
        check_agents(&x, x.len())?;
        let phi = vec![1.0; x.len()];
        Ok(Self { x, phi })
    }

    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    /// `Σᵢ φᵢ xᵢ`.
    pub fn weighted_sum(&self) -> Vec<f64> {
        weighted_sum(&self.x, Some(&self.phi))
    }

    /// `x̄_φ = (1/I) Σᵢ φᵢ xᵢ`.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let n = self.nodes() as f64;
        self.weighted_sum().into_iter().map(|v| v / n).collect()
    }

    pub fn phi_sum(&self) -> f64 {
        compensated_sum(self.phi.iter().copied())
    }

    /// `maxᵢ ‖xᵢ − x̄_φ‖`.
    pub fn consensus_error(&self) -> f64 {
        let mean = self.weighted_mean();
        self.x.iter().map(|v| dist2(v, &mean)).fold(0.0, f64::max)
    }
}

/// New and previous per-agent signals; their difference is added before normalizing.
type Perturb<'a> = Option<(&'a [Vec<f64>], &'a [Vec<f64>])>;

fn mix(state: &PushSumState, a: &WeightMatrix, perturb: Perturb<'_>) -> Result<PushSumState> {
    if !a.tag().columns() {
        bail!(Contract, "push-sum needs a column-stochastic matrix, got {:?}", a.tag());
    }
    let m = check_agents(&state.x, a.nodes())?;
    let n = a.nodes();
    let phi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j) * state.phi[j]).sum()).collect();
    if let Some(i) = phi.iter().position(|p| !(*p > 0.0)) {
        bail!(Invariant, "phi[{i}] = {} is not positive", phi[i]);
    }
    let x = (0..n)
        .map(|i| {
            let mut acc = vec![0.0; m];
            for (j, xj) in state.x.iter().enumerate() {
                let c = a.get(i, j) * state.phi[j];
                if c != 0.0 {
                    acc.iter_mut().zip(xj).for_each(|(o, v)| *o += c * v);
                }
            }
            if let Some((new, old)) = perturb {
                for ((o, un), uo) in acc.iter_mut().zip(&new[i]).zip(&old[i]) {
                    *o += un - uo;
                }
            }
            acc.into_iter().map(|v| v / phi[i]).collect()
        })
        .collect();
    Ok(PushSumState { x, phi })
}

/// `φ ← Aφ`, `xᵢ ← (1/φᵢ⁺) Σⱼ aᵢⱼ φⱼ xⱼ`.
pub fn push_sum_step(state: &PushSumState, a: &WeightMatrix) -> Result<PushSumState> {
    mix(state, a, None)
}

/// `xᵢ ← (1/φᵢ⁺)[Σⱼ aᵢⱼ φⱼ xⱼ + uᵢⁿᵉʷ − uᵢᵒˡᵈ]`; keeps `Σ φᵢxᵢ = Σ uᵢ` when started from `x⁰ = u⁰`.
pub fn tracking_step(state: &PushSumState, a: &WeightMatrix, u_new: &[Vec<f64>], u_old: &[Vec<f64>]) -> Result<PushSumState> {
    check_agents(u_new, a.nodes())?;
    check_agents(u_old, a.nodes())?;
    if u_new.first().map(Vec::len) != state.x.first().map(Vec::len) || u_old.first().map(Vec::len) != state.x.first().map(Vec::len) {
        bail!(Domain, "signal and state dimensions differ");
    }
    mix(state, a, Some((u_new, u_old)))
}

/// `W = (Φ⁺)⁻¹ A Φ`, row-stochastic whenever `A` is column-stochastic.
pub fn implied_weights(a: &WeightMatrix, phi: &[f64]) -> DMatrix<f64> {
    let n = a.nodes();
    let phi_next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j) * phi[j]).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j) * phi[j] / phi_next[i])
}

/// `(κ^{2(I−1)B}, I − κ^{2(I−1)B})`.
pub fn phi_bounds(kappa: f64, nodes: usize, b: usize) -> (f64, f64) {
    let lb = kappa.powi((2 * (nodes - 1) * b) as i32);
    (lb, nodes as f64 - lb)
}

/// Least-squares line through `(k, ln eₖ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of points used.
    pub points: usize,
}

/// Fit `ln eₖ ≈ intercept + slope·k` over the prefix of `errors` that stays above `floor`.
pub fn log_linear_fit(errors: &[f64], floor: f64) -> Result<LogLinearFit> {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .take_while(|e| **e > floor && e.is_finite())
        .enumerate()
        .map(|(k, e)| (k as f64, e.ln()))
        .collect();
    if pts.len() < 3 {
        bail!(Numerical, "only {} points above the floor {floor}", pts.len());
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LogLinearFit { slope, intercept, r2, points: pts.len() })
}

/// Output of [`perturbed_push_sum_run`]. Index `k` of the series refers to `xᵏ`.
#[derive(Debug, Clone)]
pub struct PushSumRun {
    pub states: Vec<PushSumState>,
    /// `maxᵢ ‖xᵢᵏ − (1/I) Σⱼ φⱼᵏ xⱼᵏ‖`.
    pub errors: Vec<f64>,
    /// Smallest positive weight over the whole sequence.
    pub kappa: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

/// `φᵏ⁺¹ = Aᵏφᵏ`, `xᵏ⁺¹ = Wᵏxᵏ + εᵏ`; `perturbation(k, i, out)` writes `εᵢᵏ` into a zeroed buffer.
pub fn perturbed_push_sum_run<F>(
    sequence: &GraphSequence,
    rule: WeightRule,
    perturbation: F,
    x0: Vec<Vec<f64>>,
    steps: usize,
) -> Result<PushSumRun>
where
    F: Fn(usize, usize, &mut [f64]),
{
    if x0.len() != sequence.nodes() {
        bail!(Domain, "{} initial vectors for {} nodes", x0.len(), sequence.nodes());
    }
    let mut state = PushSumState::new(x0)?;
    let m = state.x.first().map_or(0, Vec::len);
    let mut run = PushSumRun {
        errors: vec![state.consensus_error()],
        states: vec![state.clone()],
        kappa: f64::INFINITY,
        phi_min: 1.0,
        phi_max: 1.0,
    };
    let mut eps = vec![0.0; m];
    for k in 0..steps {
        let a = build_weights(&sequence.step(k), rule)?;
        run.kappa = run.kappa.min(a.kappa());
        state = push_sum_step(&state, &a)?;
        for (i, xi) in state.x.iter_mut().enumerate() {
            eps.iter_mut().for_each(|e| *e = 0.0);
            perturbation(k, i, &mut eps);
            xi.iter_mut().zip(&eps).for_each(|(v, e)| *v += e);
        }
        for p in &state.phi {
            run.phi_min = run.phi_min.min(*p);
            run.phi_max = run.phi_max.max(*p);
        }
        run.errors.push(state.consensus_error());
        run.states.push(state.clone());
    }
    Ok(run)
}

/// One stanza per step: a `step k` line followed by `i j` lines.
pub fn write_edge_list(steps: &[GraphStep]) -> String {
    let mut s = String::new();
    for (k, g) in steps.iter().enumerate() {
        let _ = writeln!(s, "step {k}");
        for (i, j) in g.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
    }
    s
}

/// Inverse of [`write_edge_list`]. Blank lines and `#` comments are ignored; steps must be numbered
/// `0, 1, …` in order.
pub fn parse_edge_list(text: &str, nodes: usize) -> Result<Vec<GraphStep>> {
    let mut steps: Vec<Vec<(usize, usize)>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Config(format!("line {}: {msg}: {raw:?}", ln + 1));
        let mut parts = line.split_whitespace();
        let a = parts.next().unwrap_or("");
        let b = parts.next().ok_or_else(|| err("expected two fields"))?;
        if parts.next().is_some() {
            return Err(err("expected two fields"));
        }
        if a == "step" {
            let k: usize = b.parse().map_err(|_| err("bad step index"))?;
            if k != steps.len() {
                return Err(err("steps must be numbered consecutively from 0"));
            }
            steps.push(Vec::new());
        } else {
            let i: usize = a.parse().map_err(|_| err("bad node index"))?;
            let j: usize = b.parse().map_err(|_| err("bad node index"))?;
            if i >= nodes || j >= nodes {
                return Err(err("node index out of range"));
            }
            steps.last_mut().ok_or_else(|| err("edge before the first step header"))?.push((i, j));
        }
    }
    steps.into_iter().map(|e| GraphStep::new(nodes, e)).collect()
}
