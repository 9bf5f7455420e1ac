use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tiletree::harness::{run_experiment_timed, timed, write_report, write_sample_fields, Experiment, ExperimentConfig, RunOptions};
use tiletree::Error;

#[derive(Parser, Debug)]
#[command(name = "tiletree", version, about = "Run tile selection and operator experiments")]
struct Cli {
    /// counting-mass, counting-energy, decompose, tree-inequality, bessel, weak-l2, sjolin, claim1 or all
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; TILETREE_JOBS takes precedence
    #[arg(long)]
    jobs: Option<usize>,
    /// Run reference recomputations on every instance
    #[arg(long)]
    verify_oracles: bool,
}

fn jobs(cli: Option<usize>) -> Result<usize, Error> {
    match std::env::var("TILETREE_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("TILETREE_JOBS must be a count, got '{v}'"))),
        Err(_) => Ok(cli.unwrap_or(0)),
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let which: Experiment = cli.experiment.parse()?;
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(cli.jobs)?)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let opts = RunOptions {
        verify_oracles: cli.verify_oracles,
    };
    let (out, secs) = timed(|| pool.install(|| run_experiment_timed(&cfg, which, opts)));
    let (report, parts) = out?;
    write_report(&report, &cli.out)?;
    write_sample_fields(&cfg, &cli.out)?;
    std::fs::write(
        cli.out.join("timing.json"),
        serde_json::json!({
            "experiment": which.name(),
            "seconds": secs,
            "threads": pool.current_num_threads(),
            "parts": parts.iter().map(|(n, s)| serde_json::json!({ "name": n, "seconds": s })).collect::<Vec<_>>(),
        })
        .to_string(),
    )?;
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} in {secs:.2}s", if report.pass { "pass" } else { "fail" });
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
