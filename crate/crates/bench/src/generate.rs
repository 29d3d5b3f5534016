//! Instance and graph emitters behind `sca gen` and `sca graph`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sca_core::network::GraphStep;
use sca_core::problems::{generate_huber, generate_lasso, generate_localization, generate_logistic};

use crate::config::{
    parse_graph, parse_problem, GraphKind, LassoSource, LogisticSource, MatrixSource, ProblemSpec, Section,
};
use crate::error::{BenchError, Result};
use crate::experiment::{build_graph, generate_least_squares};
use crate::io::write_matrix;

/// Name of the `[problem]` fragment written next to the data files.
pub const INSTANCE_FILE: &str = "instance.cfg";

/// Problems `sca gen` knows.
pub const GEN_PROBLEMS: [&str; 7] = ["lasso", "logistic", "huber", "localization", "consensus", "sparse-ls", "nnls"];

/// Generate the instance described by `key=value` pairs and write it into `dir`.
///
/// Data-backed problems get matrix files plus a `[problem]` fragment that reads them back; the
/// others get a fragment recording the generator parameters. Returns the written paths.
pub fn emit_instance(problem: &str, params: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    if !GEN_PROBLEMS.contains(&problem) {
        return Err(BenchError::config(0, format!("unknown problem '{problem}', expected one of {}", GEN_PROBLEMS.join(", "))));
    }
    let mut pairs = params.to_vec();
    pairs.push(format!("kind={problem}"));
    let s = Section::from_pairs("problem", &pairs)?;
    if s.entry("source").is_some() {
        return Err(s.error("source", "gen always generates"));
    }
    let seed: u64 = s.get_or("seed", 0)?;
    let spec = parse_problem(&s, None, seed)?;
    s.finish()?;
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;

    let mut written = Vec::new();
    let mut put_matrix = |name: &str, a: &DMatrix<f64>| -> Result<()> {
        let p = dir.join(name);
        write_matrix(&p, a)?;
        written.push(p);
        Ok(())
    };
    let mut fragment = vec![format!("kind = {}", spec.kind())];
    match &spec {
        ProblemSpec::Lasso(LassoSource::Generate { m, q, sparsity, seed }) => {
            let p = generate_lasso(*m, *q, *sparsity, *seed)?;
            put_matrix("A.csv", &p.a)?;
            put_matrix("z.csv", &column(&p.z))?;
            if let Some(x) = &p.x_star {
                put_matrix("x_star.csv", &column(x))?;
            }
            fragment.extend(["source = file".into(), "a = A.csv".into(), "z = z.csv".into(), format!("lambda = {}", p.lambda)]);
            if let Some(v) = p.v_star {
                fragment.push(format!("v_star = {v}"));
            }
        }
        ProblemSpec::Logistic(LogisticSource::Generate { samples, features, lambda, seed }) => {
            let p = generate_logistic(*samples, *features, *lambda, *seed)?;
            put_matrix("Z.csv", &p.z)?;
            put_matrix("w.csv", &column(&p.w))?;
            fragment.extend(["source = file".into(), "z = Z.csv".into(), "w = w.csv".into(), format!("lambda = {lambda}")]);
        }
        ProblemSpec::SparseLs { data: MatrixSource::Generate { rows, cols, seed }, .. }
        | ProblemSpec::Nnls { data: MatrixSource::Generate { rows, cols, seed } } => {
            let nonneg = matches!(spec, ProblemSpec::Nnls { .. });
            let (a, z, x) = generate_least_squares(*rows, *cols, nonneg, *seed);
            put_matrix("A.csv", &a)?;
            put_matrix("z.csv", &column(&z))?;
            put_matrix("x_true.csv", &column(&x))?;
            fragment.extend(["source = file".into(), "a = A.csv".into(), "z = z.csv".into()]);
            for key in ["lambda", "penalty"] {
                if let Some(e) = s.entry(key) {
                    fragment.push(format!("{key} = {}", e.value));
                }
            }
        }
        ProblemSpec::Huber { agents, m, rows, sigma, seed } => {
            let inst = generate_huber(*agents, *m, *rows, *sigma, *seed)?;
            for (i, a) in inst.agents.iter().enumerate() {
                put_matrix(&format!("B{i}.csv"), &a.b)?;
                put_matrix(&format!("d{i}.csv"), &column(&a.d))?;
            }
            if let Some(x) = &inst.x_true {
                put_matrix("x_true.csv", &column(x))?;
            }
            generator_params(&s, &mut fragment, seed);
        }
        ProblemSpec::Localization { sensors, targets, dim, p_obs, noise, seed, .. } => {
            let inst = generate_localization(*sensors, *targets, *dim, *p_obs, *noise, *seed)?;
            put_matrix("sensors.csv", &inst.sensors)?;
            put_matrix("distances.csv", &inst.d)?;
            put_matrix("observed.csv", &inst.p.map(|b| if b { 1.0 } else { 0.0 }))?;
            if let Some(t) = &inst.truth {
                put_matrix("truth.csv", &column(t))?;
            }
            generator_params(&s, &mut fragment, seed);
        }
        ProblemSpec::Consensus { seed, .. } => generator_params(&s, &mut fragment, seed),
        _ => return Err(BenchError::config(0, "gen only emits generated instances")),
    }
    let cfg = dir.join(INSTANCE_FILE);
    let text = format!("[problem]\n{}\n", fragment.join("\n"));
    std::fs::write(&cfg, text).map_err(|e| BenchError::io(&cfg, e))?;
    written.push(cfg);
    Ok(written)
}

fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

fn generator_params(s: &Section, fragment: &mut Vec<String>, seed: &u64) {
    fragment.extend(s.entries().iter().filter(|e| e.key != "kind" && e.key != "seed").map(|e| format!("{} = {}", e.key, e.value)));
    fragment.push(format!("seed = {seed}"));
}

/// The first `steps` graphs of the sequence described by `key=value` pairs, which take the
/// `[graph]` keys plus `nodes` and `steps`.
pub fn graph_steps(params: &[String]) -> Result<Vec<GraphStep>> {
    let s = Section::from_pairs("graph", params)?;
    let nodes: usize = s.require("nodes")?;
    s.check("nodes", nodes >= 2, "need at least 2 nodes")?;
    let steps: usize = s.get_or("steps", 1)?;
    s.check("steps", steps >= 1, "must be at least 1")?;
    let seed: u64 = s.get_or("seed", 0)?;
    let spec = parse_graph(&s, Some(Path::new(".")), seed)?;
    s.finish()?;
    if matches!(spec.kind, GraphKind::File { .. }) {
        return Err(s.error("kind", "graph emits generated sequences only"));
    }
    let seq = build_graph(&spec, nodes)?;
    Ok((0..steps).map(|k| seq.step(k)).collect())
}
