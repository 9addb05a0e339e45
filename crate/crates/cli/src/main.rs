use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod experiments;
mod report;

use config::{Experiment, RunConfig};
use report::{Artifacts, Failure, RunResult};

/// Runs one verification experiment and writes its artifacts.
#[derive(Parser, Debug)]
#[command(name = "nhbrack", version)]
struct Cli {
    experiment: Experiment,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out_dir` from the config, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to NHBRACK_THREADS, then the config.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn thread_count(cli: Option<usize>, cfg: Option<usize>) -> RunResult<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    if let Ok(v) = std::env::var("NHBRACK_THREADS") {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(Some)
            .ok_or_else(|| Failure::Config(format!("NHBRACK_THREADS: expected a positive integer, got `{v}`")));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> RunResult<bool> {
    let mut cfg = RunConfig::load(&cli.config).map_err(|e| Failure::Config(e.0))?;
    if let Some(e) = cfg.experiment {
        if e != cli.experiment {
            return Err(Failure::Config(format!(
                "at `experiment`: config names `{e}` but `{}` was requested",
                cli.experiment
            )));
        }
    }
    cfg.experiment = Some(cli.experiment);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    if let Some(k) = thread_count(cli.threads, cfg.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = Artifacts::new(&dir)?;
    out.write_with("config.json", |w| writeln!(w, "{}", cfg.to_canonical_json()))?;
    log::info!("running {} into {}", cli.experiment, dir.display());
    let checks = match cli.experiment {
        Experiment::ClassicalRun => experiments::classical_run(&cfg, &out)?,
        Experiment::SampleCanonical => experiments::sample_canonical(&cfg, &out)?,
        Experiment::QcleRun => experiments::qcle_run(&cfg, &out)?,
        Experiment::StationaryCheck => experiments::stationary_check(&cfg, &out)?,
        Experiment::JacobiCheck => experiments::jacobi_check(&cfg, &out)?,
        Experiment::BracketVerify => experiments::bracket_verify(&cfg, &out)?,
    };
    let mut stdout = std::io::stdout().lock();
    for c in &checks {
        let _ = writeln!(stdout, "{}", c.line());
    }
    out.json("checks.json", &checks)?;
    Ok(checks.iter().all(|c| c.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(3)
        }
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
