use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sca_bench::config::RunConfig;
use sca_bench::experiment::{output_dir, run, write_outputs};
use sca_bench::generate::{emit_instance, graph_steps};
use sca_bench::io::write_edge_list_file;
use sca_bench::{acceptance, Result};

#[derive(Parser)]
#[command(name = "sca", version, about = "Successive convex approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the solver.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the acceptance battery; exits 1 when a gating criterion fails.
    Check {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<usize>,
    },
    /// Generate a problem instance from key=value parameters.
    Gen {
        /// lasso, logistic, huber, localization, consensus, sparse-ls or nnls.
        problem: String,
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a graph sequence as an edge list (stdout without --out).
    Graph {
        /// kind=..., nodes=N, steps=K, seed=S, undirected=true|false.
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, out, workers } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(w) = workers {
                if w == 0 {
                    return Err(sca_bench::BenchError::config(0, "--workers must be at least 1"));
                }
                cfg.algorithm.set_workers(w);
            }
            let result = run(&cfg)?;
            let dir = output_dir(&cfg, out.as_deref());
            let (trace, summary) = write_outputs(&cfg.name, &result, &dir)?;
            print!("{}", result.summary.to_text());
            println!("wrote {} and {}", trace.display(), summary.display());
        }
        Command::Check { only } => {
            let ids: Vec<usize> = match only {
                Some(id) if (1..=acceptance::CRITERIA).contains(&id) => vec![id],
                Some(id) => return Err(sca_bench::BenchError::config(0, format!("criterion {id} does not exist"))),
                None => (1..=acceptance::CRITERIA).collect(),
            };
            let mut outcomes = Vec::new();
            for id in ids {
                let o = acceptance::run_criterion(id);
                println!("{o}");
                outcomes.push(o);
            }
            if !acceptance::gating_passed(&outcomes) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Gen { problem, params, out } => {
            for p in emit_instance(&problem, &params, &out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Graph { params, out } => {
            let steps = graph_steps(&params)?;
            match out {
                Some(p) => {
                    write_edge_list_file(&p, &steps)?;
                    println!("wrote {}", p.display());
                }
                None => print!("{}", sca_core::network::write_edge_list(&steps)),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sca: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
