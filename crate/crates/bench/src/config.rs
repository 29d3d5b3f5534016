//! Run configuration files.
//!
//! The format is flat `key = value` text grouped under `[section]` headers:
//!
//! ```text
//! # full-line comments start with '#' or ';'
//! [experiment]
//! name = lasso-flexa
//! seed = 7
//!
//! [problem]
//! kind = lasso
//! m = 1000
//! ```
//!
//! Keys and section names are lowercase ASCII with `_` or `-`. A key may appear once per section
//! and a section once per file. Unknown sections and keys are rejected. Parameterized values use
//! call syntax such as `recursive(0.1, 0.01)`. Relative paths resolve against the config file's
//! directory. Every diagnostic carries the 1-based line it refers to.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sca_core::base::Schedule;
use sca_core::flexa::{ErrorBound, Sampling, SelectionRule};
use sca_core::network::WeightRule;
use sca_core::penalties::DcPenalty;
use sca_core::problems::{HuberSurrogate, LocalizationSurrogate};
use sca_core::sonata::Combine;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug)]
pub struct Section {
    pub name: String,
    pub line: usize,
    entries: Vec<Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl Section {
    fn new(name: &str, line: usize) -> Self {
        Self { name: name.to_string(), line, entries: Vec::new(), used: RefCell::new(BTreeSet::new()) }
    }

    /// A section built from `key=value` arguments; the line number is the argument position.
    pub fn from_pairs<S: AsRef<str>>(name: &str, pairs: &[S]) -> Result<Self> {
        let mut s = Section::new(name, 0);
        for (i, p) in pairs.iter().enumerate() {
            let p = p.as_ref();
            let Some((k, v)) = p.split_once('=') else {
                return Err(BenchError::config(i + 1, format!("expected key=value, got '{p}'")));
            };
            s.insert(k.trim(), v.trim(), i + 1)?;
        }
        Ok(s)
    }

    fn insert(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        if !is_ident(key) {
            return Err(BenchError::config(line, format!("invalid key '{key}'")));
        }
        if value.is_empty() {
            return Err(BenchError::config(line, format!("key '{key}' has an empty value")));
        }
        if let Some(prev) = self.entries.iter().find(|e| e.key == key) {
            return Err(BenchError::config(line, format!("duplicate key '{key}' (first set on line {})", prev.line)));
        }
        self.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
        Ok(())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.iter().find(|e| e.key == key);
        if e.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        e
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| BenchError::config(e.line, format!("[{}] {key}: cannot parse '{}': {err}", self.name, e.value))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| BenchError::config(self.line, format!("[{}] is missing required key '{key}'", self.name)))
    }

    /// Line of `key`, or of the section header when the key is absent.
    pub fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|e| e.key == key).map_or(self.line, |e| e.line)
    }

    /// A configuration error attached to `key`.
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> BenchError {
        BenchError::config(self.line_of(key), format!("[{}] {key}: {msg}", self.name))
    }

    /// Fail unless `ok` holds for the value of `key`.
    pub fn check(&self, key: &str, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(key, msg))
        }
    }

    /// Reject keys that no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|e| !used.contains(&e.key)) {
            Some(e) => Err(BenchError::config(e.line, format!("unknown key '{}' in [{}]", e.key, self.name))),
            None => Ok(()),
        }
    }
}

/// A parsed but untyped configuration file.
#[derive(Debug)]
pub struct RawConfig {
    sections: Vec<Section>,
    used: RefCell<BTreeSet<String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(rest) = t.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(BenchError::config(line, "unterminated section header"));
                };
                let name = name.trim();
                if !is_ident(name) {
                    return Err(BenchError::config(line, format!("invalid section name '{name}'")));
                }
                if let Some(prev) = sections.iter().find(|s| s.name == name) {
                    return Err(BenchError::config(line, format!("duplicate section [{name}] (first on line {})", prev.line)));
                }
                sections.push(Section::new(name, line));
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(BenchError::config(line, format!("expected 'key = value' or '[section]', got '{t}'")));
            };
            let Some(section) = sections.last_mut() else {
                return Err(BenchError::config(line, "key outside of any section"));
            };
            section.insert(k.trim(), v.trim(), line)?;
        }
        Ok(Self { sections, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        let s = self.sections.iter().find(|s| s.name == name);
        if s.is_some() {
            self.used.borrow_mut().insert(name.to_string());
        }
        s
    }

    pub fn require(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| BenchError::config(0, format!("missing section [{name}]")))
    }

    /// Reject unknown sections and unknown keys inside known ones.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for s in &self.sections {
            if !used.contains(&s.name) {
                return Err(BenchError::config(s.line, format!("unknown section [{}]", s.name)));
            }
            s.finish()?;
        }
        Ok(())
    }
}

/// `name` or `name(a, b, …)` with numeric arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<f64>,
}

impl FromStr for Call {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            None => (s, Vec::new()),
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or("missing ')'")?;
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|a| a.trim().parse::<f64>().map_err(|e| format!("argument '{}': {e}", a.trim())))
                        .collect::<std::result::Result<_, _>>()?
                };
                (name.trim(), args)
            }
        };
        if !is_ident(name) {
            return Err(format!("invalid name '{name}'"));
        }
        Ok(Call { name: name.to_string(), args })
    }
}

impl Call {
    fn arity(&self, n: &[usize]) -> std::result::Result<(), String> {
        if n.contains(&self.args.len()) {
            Ok(())
        } else {
            Err(format!("{} takes {:?} arguments, got {}", self.name, n, self.args.len()))
        }
    }
}

/// Comma-separated numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{}': {e}", v.trim()))).collect::<std::result::Result<_, _>>().map(NumList)
    }
}

pub fn parse_schedule(c: &Call) -> std::result::Result<Schedule, String> {
    let a = &c.args;
    let s = match c.name.as_str() {
        "constant" => {
            c.arity(&[1])?;
            Schedule::constant(a[0])
        }
        "recursive" => {
            c.arity(&[2])?;
            Schedule::recursive(a[0], a[1])
        }
        "guarded" => {
            c.arity(&[0, 2])?;
            if a.is_empty() {
                Ok(Schedule::guarded_default())
            } else {
                Schedule::guarded(a[0], a[1])
            }
        }
        "harmonic" => {
            c.arity(&[2])?;
            Schedule::ratio_harmonic(a[0], a[1])
        }
        "armijo" => {
            c.arity(&[1, 3])?;
            if a.len() == 1 {
                Schedule::armijo_default(a[0])
            } else {
                Schedule::armijo(a[0], a[1], a[2])
            }
        }
        other => return Err(format!("unknown schedule '{other}'")),
    };
    s.map_err(|e| e.to_string())
}

pub fn parse_penalty(c: &Call) -> std::result::Result<DcPenalty, String> {
    let a = &c.args;
    let p = match c.name.as_str() {
        "exp" => {
            c.arity(&[1])?;
            DcPenalty::exp(a[0])
        }
        "log" => {
            c.arity(&[1])?;
            DcPenalty::log(a[0])
        }
        "lp-plus" | "lp_plus" => {
            c.arity(&[2])?;
            DcPenalty::lp_plus(a[0], a[1])
        }
        "lp-minus" | "lp_minus" => {
            c.arity(&[2])?;
            DcPenalty::lp_minus(a[0], a[1])
        }
        "scad" => {
            c.arity(&[1, 2])?;
            if a.len() == 1 {
                DcPenalty::scad_default(a[0])
            } else {
                DcPenalty::scad(a[0], a[1])
            }
        }
        other => return Err(format!("unknown penalty '{other}'")),
    };
    p.map_err(|e| e.to_string())
}

pub fn parse_weights(c: &Call) -> std::result::Result<WeightRule, String> {
    match c.name.as_str() {
        "metropolis" => c.arity(&[0]).map(|_| WeightRule::Metropolis),
        "max-degree" => c.arity(&[0]).map(|_| WeightRule::MaxDegree),
        "push-sum" => c.arity(&[0]).map(|_| WeightRule::PushSumOutdegree),
        "laplacian" => c.arity(&[1]).map(|_| WeightRule::Laplacian(c.args[0])),
        other => Err(format!("unknown weight rule '{other}'")),
    }
}

fn parse_combine(s: &str) -> std::result::Result<Combine, String> {
    match s {
        "atc" => Ok(Combine::Atc),
        "caa" => Ok(Combine::Caa),
        other => Err(format!("expected atc or caa, got '{other}'")),
    }
}

fn resolve(base: Option<&Path>, s: &Section, key: &str) -> Result<PathBuf> {
    let raw: String = s.require(key)?;
    let p = PathBuf::from(&raw);
    let p = match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    };
    if !p.is_file() {
        return Err(s.error(key, format!("file '{}' does not exist", p.display())));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LassoSource {
    Generate { m: usize, q: usize, sparsity: f64, seed: u64 },
    File { a: PathBuf, z: PathBuf, lambda: f64, v_star: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogisticSource {
    Generate { samples: usize, features: usize, lambda: f64, seed: u64 },
    File { z: PathBuf, w: PathBuf, lambda: f64 },
}

/// Least-squares data `(A, z)`: a Gaussian draw or two matrix files.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    Generate { rows: usize, cols: usize, seed: u64 },
    File { a: PathBuf, z: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Lasso(LassoSource),
    Logistic(LogisticSource),
    Huber { agents: usize, m: usize, rows: usize, sigma: f64, seed: u64 },
    Localization { sensors: usize, targets: usize, dim: usize, p_obs: f64, noise: f64, bounds: Option<(f64, f64)>, seed: u64 },
    Consensus { nodes: usize, dim: usize, seed: u64 },
    SparseLs { data: MatrixSource, lambda: f64, penalty: DcPenalty },
    Nnls { data: MatrixSource },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Lasso(_) => "lasso",
            ProblemSpec::Logistic(_) => "logistic",
            ProblemSpec::Huber { .. } => "huber",
            ProblemSpec::Localization { .. } => "localization",
            ProblemSpec::Consensus { .. } => "consensus",
            ProblemSpec::SparseLs { .. } => "sparse-ls",
            ProblemSpec::Nnls { .. } => "nnls",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauSpec {
    Uniform(f64),
    /// Adaptive policy; `None` starts from the problem's heuristic.
    Adaptive(Option<f64>),
}

#[derive(Debug, Clone)]
pub struct FlexaSpec {
    pub selection: SelectionRule,
    pub tau: TauSpec,
    pub schedule: Schedule,
    /// Use the proximal-linear surrogate instead of the problem's exact one.
    pub prox_linear: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SonataSurrogate {
    Huber(HuberSurrogate),
    Localization(LocalizationSurrogate),
}

#[derive(Debug, Clone)]
pub struct SonataSpec {
    pub surrogate: SonataSurrogate,
    pub tau: f64,
    pub x_update: Combine,
    pub y_update: Combine,
    pub schedule: Schedule,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    None,
    /// `ε = c/(k+1)²` added by every agent.
    Vanishing(f64),
    /// `±c` alternating across agents.
    Bounded(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmVariant {
    DoubleLoop,
    OneStep,
    GradProj,
    Multiplicative,
}

#[derive(Debug, Clone)]
pub enum AlgorithmSpec {
    Flexa(FlexaSpec),
    Sonata(SonataSpec),
    Consensus { perturbation: Perturbation },
    Mm { variant: MmVariant, inner_max_iters: usize, inner_tol: f64 },
}

impl AlgorithmSpec {
    pub fn module(&self) -> &'static str {
        match self {
            AlgorithmSpec::Flexa(_) => "flexa",
            AlgorithmSpec::Sonata(_) => "sonata",
            AlgorithmSpec::Consensus { .. } => "consensus",
            AlgorithmSpec::Mm { .. } => "mm",
        }
    }

    /// Override the worker count where the algorithm has one.
    pub fn set_workers(&mut self, workers: usize) {
        match self {
            AlgorithmSpec::Flexa(f) => f.workers = workers,
            AlgorithmSpec::Sonata(s) => s.workers = workers,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    PermutedRingRandom,
    Ring,
    Path,
    Complete,
    File { path: PathBuf, b: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub weights: WeightRule,
    pub undirected: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_iters: usize,
    /// SONATA only: two messages per iteration.
    pub max_messages: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Stationarity stop: FLEXA block displacement, SONATA `M`, MM iterate change. Zero disables it.
    pub stop: f64,
    /// FLEXA stop once `re(x)` falls below this value.
    pub target_re: Option<f64>,
    /// MM stop on relative descent.
    pub relative_descent: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    /// Output directory from the file; the CLI falls back to `SCA_OUT_DIR`.
    pub output: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    pub graph: Option<GraphSpec>,
    pub budget: Budget,
    pub tolerances: Tolerances,
}

fn positive_usize(s: &Section, key: &str) -> Result<usize> {
    let v: usize = s.require(key)?;
    s.check(key, v > 0, "must be at least 1")?;
    Ok(v)
}

fn positive_f64(s: &Section, key: &str) -> Result<f64> {
    let v: f64 = s.require(key)?;
    s.check(key, v > 0.0 && v.is_finite(), "must be positive and finite")?;
    Ok(v)
}

fn call_with<T>(s: &Section, key: &str, f: impl Fn(&Call) -> std::result::Result<T, String>) -> Result<Option<T>> {
    match s.get::<Call>(key)? {
        None => Ok(None),
        Some(c) => f(&c).map(Some).map_err(|e| s.error(key, e)),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    /// Parse and validate; `base` resolves relative file paths.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let cfg = Self::from_raw(&raw, base)?;
        raw.finish()?;
        Ok(cfg)
    }

    fn from_raw(raw: &RawConfig, base: Option<&Path>) -> Result<Self> {
        let exp = raw.require("experiment")?;
        let name: String = exp.require("name")?;
        exp.check("name", is_ident(&name), "use lowercase letters, digits, '-' or '_'")?;
        let seed: u64 = exp.get_or("seed", 0)?;
        let output = match raw.section("output") {
            Some(o) => o.get::<String>("dir")?.map(|d| match base {
                Some(b) if Path::new(&d).is_relative() => b.join(d),
                _ => PathBuf::from(d),
            }),
            None => None,
        };
        let problem = parse_problem(raw.require("problem")?, base, seed)?;
        let alg_section = raw.require("algorithm")?;
        let algorithm = parse_algorithm(alg_section, &problem)?;
        let graph = match (&algorithm, raw.section("graph")) {
            (AlgorithmSpec::Sonata(_) | AlgorithmSpec::Consensus { .. }, Some(g)) => Some(parse_graph(g, base, seed)?),
            (AlgorithmSpec::Sonata(_) | AlgorithmSpec::Consensus { .. }, None) => {
                return Err(BenchError::config(0, format!("module {} needs a [graph] section", algorithm.module())))
            }
            (_, Some(g)) => return Err(BenchError::config(g.line, format!("[graph] is not used by module {}", algorithm.module()))),
            (_, None) => None,
        };
        if let (Some(g), AlgorithmSpec::Consensus { .. }) = (&graph, &algorithm) {
            let doubly = g.weights != WeightRule::PushSumOutdegree;
            if doubly && !g.undirected && g.kind == GraphKind::PermutedRingRandom {
                let s = raw.require("graph")?;
                return Err(s.error("weights", "doubly-stochastic rules need undirected = true on this graph"));
            }
        }
        let budget_s = raw.require("budget")?;
        let max_iters = positive_usize(budget_s, "max_iters")?;
        let max_messages: Option<usize> = budget_s.get("max_messages")?;
        if max_messages.is_some() && !matches!(algorithm, AlgorithmSpec::Sonata(_)) {
            return Err(budget_s.error("max_messages", "only SONATA counts messages"));
        }
        let budget = Budget { max_iters, max_messages };
        let tolerances = match raw.section("tolerances") {
            None => Tolerances { stop: 0.0, target_re: None, relative_descent: 1e-10 },
            Some(t) => {
                let stop: f64 = t.get_or("stop", 0.0)?;
                t.check("stop", stop >= 0.0, "must be nonnegative")?;
                let target_re: Option<f64> = t.get("target_re")?;
                if let Some(r) = target_re {
                    t.check("target_re", r > 0.0, "must be positive")?;
                    t.check("target_re", matches!(algorithm, AlgorithmSpec::Flexa(_)), "only FLEXA tracks re(x)")?;
                }
                let relative_descent: f64 = t.get_or("relative_descent", 1e-10)?;
                t.check("relative_descent", relative_descent > 0.0, "must be positive")?;
                Tolerances { stop, target_re, relative_descent }
            }
        };
        if tolerances.target_re.is_some() {
            let known = matches!(
                problem,
                ProblemSpec::Lasso(LassoSource::Generate { .. }) | ProblemSpec::Lasso(LassoSource::File { v_star: Some(_), .. })
            );
            if !known {
                let t = raw.require("tolerances")?;
                return Err(t.error("target_re", "needs a problem with known optimal value (generated LASSO or v_star)"));
            }
        }
        if let (AlgorithmSpec::Mm { .. }, true) = (&algorithm, tolerances.stop == 0.0) {
            return Err(BenchError::config(0, "module mm needs [tolerances] stop > 0"));
        }
        Ok(Self { name, seed, output, problem, algorithm, graph, budget, tolerances })
    }
}

fn parse_matrix_source(s: &Section, base: Option<&Path>, seed: u64) -> Result<MatrixSource> {
    let source: String = s.get_or("source", "generate".to_string())?;
    match source.as_str() {
        "generate" => Ok(MatrixSource::Generate {
            rows: positive_usize(s, "rows")?,
            cols: positive_usize(s, "cols")?,
            seed: s.get_or("seed", seed)?,
        }),
        "file" => Ok(MatrixSource::File { a: resolve(base, s, "a")?, z: resolve(base, s, "z")? }),
        other => Err(s.error("source", format!("expected generate or file, got '{other}'"))),
    }
}

/// Parse a `[problem]` section; `seed` is the default generator seed.
pub fn parse_problem(s: &Section, base: Option<&Path>, seed: u64) -> Result<ProblemSpec> {
    let kind: String = s.require("kind")?;
    let seed = s.get_or("seed", seed)?;
    let spec = match kind.as_str() {
        "lasso" => {
            let source: String = s.get_or("source", "generate".to_string())?;
            match source.as_str() {
                "generate" => {
                    let sparsity: f64 = s.require("sparsity")?;
                    s.check("sparsity", sparsity > 0.0 && sparsity <= 1.0, "must lie in (0, 1]")?;
                    let q = positive_usize(s, "q")?;
                    s.check("q", q >= 2, "must be at least 2")?;
                    ProblemSpec::Lasso(LassoSource::Generate { m: positive_usize(s, "m")?, q, sparsity, seed })
                }
                "file" => ProblemSpec::Lasso(LassoSource::File {
                    a: resolve(base, s, "a")?,
                    z: resolve(base, s, "z")?,
                    lambda: positive_f64(s, "lambda")?,
                    v_star: s.get("v_star")?,
                }),
                other => return Err(s.error("source", format!("expected generate or file, got '{other}'"))),
            }
        }
        "logistic" => {
            let source: String = s.get_or("source", "generate".to_string())?;
            let lambda: f64 = s.require("lambda")?;
            s.check("lambda", lambda >= 0.0, "must be nonnegative")?;
            match source.as_str() {
                "generate" => ProblemSpec::Logistic(LogisticSource::Generate {
                    samples: positive_usize(s, "samples")?,
                    features: positive_usize(s, "features")?,
                    lambda,
                    seed,
                }),
                "file" => ProblemSpec::Logistic(LogisticSource::File { z: resolve(base, s, "z")?, w: resolve(base, s, "w")?, lambda }),
                other => return Err(s.error("source", format!("expected generate or file, got '{other}'"))),
            }
        }
        "huber" => ProblemSpec::Huber {
            agents: positive_usize(s, "agents")?,
            m: positive_usize(s, "m")?,
            rows: positive_usize(s, "rows")?,
            sigma: positive_f64(s, "sigma")?,
            seed,
        },
        "localization" => {
            let dim: usize = s.get_or("dim", 2)?;
            s.check("dim", dim >= 1, "must be at least 1")?;
            let sensors = positive_usize(s, "sensors")?;
            s.check("sensors", sensors > dim, "need more sensors than dimensions")?;
            let p_obs: f64 = s.require("p_obs")?;
            s.check("p_obs", p_obs > 0.0 && p_obs <= 1.0, "must lie in (0, 1]")?;
            let noise: f64 = s.get_or("noise", 0.0)?;
            s.check("noise", noise >= 0.0, "must be nonnegative")?;
            let bounds = match s.get::<NumList>("box")? {
                None => None,
                Some(NumList(v)) => {
                    s.check("box", v.len() == 2 && v[0] < v[1], "expected 'lo, hi' with lo < hi")?;
                    Some((v[0], v[1]))
                }
            };
            ProblemSpec::Localization { sensors, targets: positive_usize(s, "targets")?, dim, p_obs, noise, bounds, seed }
        }
        "consensus" => ProblemSpec::Consensus { nodes: positive_usize(s, "nodes")?, dim: positive_usize(s, "dim")?, seed },
        "sparse-ls" => {
            let penalty = call_with(s, "penalty", parse_penalty)?
                .ok_or_else(|| BenchError::config(s.line, "[problem] is missing required key 'penalty'"))?;
            ProblemSpec::SparseLs { data: parse_matrix_source(s, base, seed)?, lambda: positive_f64(s, "lambda")?, penalty }
        }
        "nnls" => ProblemSpec::Nnls { data: parse_matrix_source(s, base, seed)? },
        other => return Err(s.error("kind", format!("unknown problem kind '{other}'"))),
    };
    Ok(spec)
}

fn parse_selection(s: &Section) -> Result<SelectionRule> {
    let sel: String = s.get_or("selection", "all".to_string())?;
    let bound = match s.get_or("bound", "displacement".to_string())?.as_str() {
        "displacement" => ErrorBound::Displacement,
        "prox-gradient" => ErrorBound::ProxGradient,
        other => return Err(s.error("bound", format!("expected displacement or prox-gradient, got '{other}'"))),
    };
    let rule = match sel.as_str() {
        "all" => SelectionRule::All,
        "greedy" => {
            let sigma: f64 = s.require("sigma")?;
            s.check("sigma", (0.0..=1.0).contains(&sigma), "must lie in [0, 1]")?;
            if sigma == 0.0 {
                SelectionRule::All
            } else {
                SelectionRule::Greedy { rho: sigma, bound }
            }
        }
        "cyclic" => SelectionRule::EssentiallyCyclic { period: positive_usize(s, "period")? },
        "random" => SelectionRule::Random(Sampling::Nice { tau: positive_usize(s, "sample")? }),
        "random-greedy" => {
            let sigma: f64 = s.require("sigma")?;
            s.check("sigma", sigma > 0.0 && sigma <= 1.0, "must lie in (0, 1]")?;
            SelectionRule::RandomGreedy { sampling: Sampling::Nice { tau: positive_usize(s, "sample")? }, rho: sigma, bound }
        }
        other => return Err(s.error("selection", format!("unknown selection rule '{other}'"))),
    };
    Ok(rule)
}

fn parse_algorithm(s: &Section, problem: &ProblemSpec) -> Result<AlgorithmSpec> {
    let module: String = s.require("module")?;
    let workers: usize = s.get_or("workers", 1)?;
    s.check("workers", workers >= 1, "must be at least 1")?;
    let mismatch = || s.error("module", format!("module {module} cannot run problem kind {}", problem.kind()));
    let spec = match module.as_str() {
        "flexa" => {
            if !matches!(problem, ProblemSpec::Lasso(_) | ProblemSpec::Logistic(_)) {
                return Err(mismatch());
            }
            let tau = match s.entry("tau").map(|e| e.value.clone()) {
                None => TauSpec::Adaptive(None),
                Some(v) if v.starts_with("adaptive") => match v.parse::<Call>().map(|c| c.args) {
                    Ok(a) if a.is_empty() => TauSpec::Adaptive(None),
                    Ok(a) if a.len() == 1 && a[0] > 0.0 => TauSpec::Adaptive(Some(a[0])),
                    _ => return Err(s.error("tau", "expected adaptive or adaptive(t) with t > 0")),
                },
                Some(_) => {
                    let t: f64 = s.require("tau")?;
                    s.check("tau", t > 0.0, "must be positive")?;
                    TauSpec::Uniform(t)
                }
            };
            let surrogate: String = s.get_or("surrogate", "exact".to_string())?;
            let prox_linear = match surrogate.as_str() {
                "exact" => false,
                "prox-linear" => true,
                other => return Err(s.error("surrogate", format!("expected exact or prox-linear, got '{other}'"))),
            };
            let schedule = call_with(s, "schedule", parse_schedule)?.unwrap_or_else(Schedule::guarded_default);
            AlgorithmSpec::Flexa(FlexaSpec { selection: parse_selection(s)?, tau, schedule, prox_linear, workers })
        }
        "sonata" => {
            let name: String = s.require("surrogate")?;
            let surrogate = match (problem, name.as_str()) {
                (ProblemSpec::Huber { .. }, "linear") => SonataSurrogate::Huber(HuberSurrogate::Linear),
                (ProblemSpec::Huber { .. }, "quadratic") => SonataSurrogate::Huber(HuberSurrogate::Quadratic),
                (ProblemSpec::Localization { .. }, "linear") => SonataSurrogate::Localization(LocalizationSurrogate::Linear),
                (ProblemSpec::Localization { .. }, "partial-convex") => {
                    SonataSurrogate::Localization(LocalizationSurrogate::PartialConvex)
                }
                (ProblemSpec::Huber { .. } | ProblemSpec::Localization { .. }, other) => {
                    return Err(s.error("surrogate", format!("surrogate '{other}' does not apply to {}", problem.kind())))
                }
                _ => return Err(mismatch()),
            };
            let tau = positive_f64(s, "tau")?;
            let x_update = s.get::<String>("x_update")?.map(|v| parse_combine(&v)).transpose().map_err(|e| s.error("x_update", e))?;
            let y_update = s.get::<String>("y_update")?.map(|v| parse_combine(&v)).transpose().map_err(|e| s.error("y_update", e))?;
            let schedule = call_with(s, "schedule", parse_schedule)?
                .ok_or_else(|| BenchError::config(s.line, "[algorithm] is missing required key 'schedule'"))?;
            if schedule.is_armijo() {
                return Err(s.error("schedule", "SONATA has no line search"));
            }
            AlgorithmSpec::Sonata(SonataSpec {
                surrogate,
                tau,
                x_update: x_update.unwrap_or(Combine::Atc),
                y_update: y_update.unwrap_or(Combine::Caa),
                schedule,
                workers,
            })
        }
        "consensus" => {
            if !matches!(problem, ProblemSpec::Consensus { .. }) {
                return Err(mismatch());
            }
            let perturbation = match s.get::<Call>("perturbation")? {
                None => Perturbation::None,
                Some(c) => match (c.name.as_str(), c.args.as_slice()) {
                    ("none", []) => Perturbation::None,
                    ("vanishing", [v]) => Perturbation::Vanishing(*v),
                    ("bounded", [v]) => Perturbation::Bounded(*v),
                    _ => return Err(s.error("perturbation", "expected none, vanishing(c) or bounded(c)")),
                },
            };
            AlgorithmSpec::Consensus { perturbation }
        }
        "mm" => {
            let variant: String = s.require("variant")?;
            let variant = match (problem, variant.as_str()) {
                (ProblemSpec::SparseLs { .. }, "double-loop") => MmVariant::DoubleLoop,
                (ProblemSpec::SparseLs { .. }, "one-step") => MmVariant::OneStep,
                (ProblemSpec::Nnls { .. }, "grad-proj") => MmVariant::GradProj,
                (ProblemSpec::Nnls { .. }, "multiplicative") => MmVariant::Multiplicative,
                (ProblemSpec::SparseLs { .. } | ProblemSpec::Nnls { .. }, other) => {
                    return Err(s.error("variant", format!("variant '{other}' does not apply to {}", problem.kind())))
                }
                _ => return Err(mismatch()),
            };
            let inner_max_iters: usize = s.get_or("inner_max_iters", 200)?;
            s.check("inner_max_iters", inner_max_iters >= 1, "must be at least 1")?;
            let inner_tol: f64 = s.get_or("inner_tol", 1e-8)?;
            s.check("inner_tol", inner_tol > 0.0, "must be positive")?;
            AlgorithmSpec::Mm { variant, inner_max_iters, inner_tol }
        }
        other => return Err(s.error("module", format!("unknown module '{other}'"))),
    };
    Ok(spec)
}

/// Parse a `[graph]` section; `seed` is the default graph seed.
pub fn parse_graph(s: &Section, base: Option<&Path>, seed: u64) -> Result<GraphSpec> {
    let kind: String = s.require("kind")?;
    let kind = match kind.as_str() {
        "permuted-ring-random" => GraphKind::PermutedRingRandom,
        "ring" => GraphKind::Ring,
        "path" => GraphKind::Path,
        "complete" => GraphKind::Complete,
        "file" => GraphKind::File { path: resolve(base, s, "file")?, b: s.get_or("b", 1)? },
        other => return Err(s.error("kind", format!("unknown graph kind '{other}'"))),
    };
    let weights = call_with(s, "weights", parse_weights)?.unwrap_or(WeightRule::PushSumOutdegree);
    let undirected: bool = s.get_or("undirected", false)?;
    Ok(GraphSpec { kind, weights, undirected, seed: s.get_or("seed", seed)? })
}
