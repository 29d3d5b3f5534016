use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sca() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sca"));
    c.env_remove("SCA_OUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("no {key} in summary:\n{text}"))
}

#[test]
fn lasso_run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(sca().args(["run"]).arg(config("lasso-flexa.cfg")).arg("--out").arg(dir.path()).output().unwrap());
    let summary = std::fs::read_to_string(dir.path().join("lasso-flexa.summary")).unwrap();
    assert_eq!(summary_value(&summary, "stop"), "TargetReached");
    let re: f64 = summary_value(&summary, "re").parse().unwrap();
    assert!(re <= 1e-6, "re = {re}");
    let trace = std::fs::read_to_string(dir.path().join("lasso-flexa.trace.csv")).unwrap();
    assert!(trace.starts_with("#schema=1\n"));
    assert!(trace.lines().nth(1).unwrap().starts_with("iteration,objective,re,"));
}

#[test]
fn sonata_traces_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(sca().arg("run").arg(config("sonata-huber.cfg")).arg("--out").arg(d.path()).output().unwrap());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("sonata-huber.trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn flexa_trace_does_not_depend_on_workers() {
    let mut traces = Vec::new();
    for w in ["1", "2", "8"] {
        let d = tempfile::tempdir().unwrap();
        ok(sca().arg("run").arg(config("lasso-flexa.cfg")).args(["--workers", w]).arg("--out").arg(d.path()).output().unwrap());
        traces.push(std::fs::read(d.path().join("lasso-flexa.trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[0], traces[2]);
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[experiment]\nname = bad\n[problem]\nkind = lasso\nm = ten\nq = 10\nsparsity = 0.1\n").unwrap();
    let out = sca().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("config line 5"), "{err}");

    std::fs::write(&path, "[experiment]\nname = bad\nname = again\n").unwrap();
    let out = sca().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("config line 3"));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = sca().arg("run").arg(config("consensus.cfg")).env("SCA_OUT_DIR", dir.path()).output().unwrap();
    ok(out);
    assert!(dir.path().join("consensus.trace.csv").is_file());
    assert!(dir.path().join("consensus.summary").is_file());
}

#[test]
fn generated_instance_and_graph_run_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(sca().args(["gen", "lasso", "m=60", "q=30", "sparsity=0.1", "seed=4", "--out"]).arg(&data).output().unwrap());
    let fragment = std::fs::read_to_string(data.join("instance.cfg")).unwrap();
    let cfg = data.join("run.cfg");
    std::fs::write(
        &cfg,
        format!("[experiment]\nname = fromfile\n{fragment}[algorithm]\nmodule = flexa\n[budget]\nmax_iters = 500\n[tolerances]\ntarget_re = 1e-6\n"),
    )
    .unwrap();
    let text = ok(sca().arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap());
    assert_eq!(summary_value(&text, "stop"), "TargetReached");

    let edges = dir.path().join("graph.txt");
    ok(sca().args(["graph", "kind=permuted-ring-random", "nodes=10", "steps=50", "seed=3", "--out"]).arg(&edges).output().unwrap());
    let stdout = ok(sca().args(["graph", "kind=permuted-ring-random", "nodes=10", "steps=50", "seed=3"]).output().unwrap());
    assert_eq!(std::fs::read_to_string(&edges).unwrap(), stdout);

    let base = std::fs::read_to_string(config("sonata-huber.cfg")).unwrap();
    let text = base.replace("kind = permuted-ring-random\nseed = 901", &format!("kind = file\nfile = {}", edges.display()));
    let cfg = dir.path().join("file-graph.cfg");
    std::fs::write(&cfg, text.replace("max_iters = 1000", "max_iters = 100")).unwrap();
    let text = ok(sca().arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap());
    assert_eq!(summary_value(&text, "iterations"), "100");
}

#[test]
fn gen_rejects_unknown_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = sca().args(["gen", "matrix", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        sca_bench::config::RunConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 7);
}
