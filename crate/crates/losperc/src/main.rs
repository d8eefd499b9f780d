use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use losperc::experiments::{
    cmd_coverage1d, cmd_crossing, cmd_fuzz, cmd_lambda_c, cmd_ngood, cmd_pc_bisect, cmd_russo, cmd_stab, cmd_sweep,
    cmd_unique, emit, ExperimentError, RunConfig,
};

/// Line-of-sight Cox percolation experiments.
#[derive(Debug, Parser)]
#[command(name = "losperc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicates per estimate.
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Side of the analysis window.
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Simulation margin around the analysis window.
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, env = "LOSPERC_THREADS")]
    threads: Option<usize>,
    /// CSV output path; a JSON mirror is written beside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Crossing probability of the analysis box.
    Crossing,
    /// Crossing probabilities over a (p, lambda, r) grid.
    Sweep,
    /// Finite-size site threshold at lambda = 0.
    PcBisect,
    /// Finite-size intensity threshold.
    LambdaC,
    /// Probability that the origin is n-good.
    Ngood,
    /// Stabilization radius tail.
    Stab,
    /// Pivotal-sum and finite-difference derivatives of the arm probability.
    Russo,
    /// Number of spanning clusters.
    Unique,
    /// One-dimensional coverage probabilities and derivatives.
    Coverage1d,
    /// Property suites.
    Fuzz,
}

fn load(cli: &Cli) -> Result<RunConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.reps = cli.reps.unwrap_or(cfg.reps);
    cfg.window = cli.window.unwrap_or(cfg.window);
    cfg.margin = cli.margin.or(cfg.margin);
    cfg.threads = cli.threads.or(cfg.threads);
    cfg.out = cli.out.clone().or(cfg.out);
    cfg.validate()?;
    Ok(cfg)
}

fn write<R: Serialize>(rows: &[R], cfg: &RunConfig) -> Result<(), ExperimentError> {
    if let Some(text) = emit(rows, cfg, cfg.out.as_deref().map(Path::new))? {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, ExperimentError> {
    let cfg = load(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Crossing => write(&cmd_crossing(&cfg)?.rows, &cfg)?,
        Command::Sweep => write(&cmd_sweep(&cfg)?.rows, &cfg)?,
        Command::PcBisect => write(&cmd_pc_bisect(&cfg)?.iter().flat_map(|r| r.rows()).collect::<Vec<_>>(), &cfg)?,
        Command::LambdaC => write(&cmd_lambda_c(&cfg)?.iter().flat_map(|r| r.rows()).collect::<Vec<_>>(), &cfg)?,
        Command::Ngood => write(&cmd_ngood(&cfg)?.rows, &cfg)?,
        Command::Stab => write(&cmd_stab(&cfg)?.rows, &cfg)?,
        Command::Russo => write(&cmd_russo(&cfg)?, &cfg)?,
        Command::Unique => write(&cmd_unique(&cfg)?, &cfg)?,
        Command::Coverage1d => write(&cmd_coverage1d(&cfg)?, &cfg)?,
        Command::Fuzz => {
            let report = cmd_fuzz(&cfg)?;
            write(&report.rows, &cfg)?;
            if report.total_failures() > 0 {
                eprintln!("fuzz: {} failing cases", report.total_failures());
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
