use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdspde::analysis::classify;
use bdspde::config::ExperimentConfig;
use bdspde::error::Error;
use bdspde::harness::{self, ValidationOptions};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Stochastic predator-prey reaction-diffusion simulator.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; defaults to the config's output or stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ensemble size; overrides the config.
    #[arg(long, global = true)]
    traj: Option<usize>,
    /// Worker threads for trajectory fan-out.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectory 0 and write its observables.
    Simulate,
    /// Simulate the ensemble and write mean/standard-error series.
    Ensemble,
    /// Print the threshold report without simulating.
    Thresholds,
    /// Run the invariant suite.
    Validate,
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Io { .. } => Failure::Config(e),
            e => Failure::Runtime(e),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Failure::Config(Error::Config { line: None, key: "--config".into(), message: "required".into() }))?;
    let mut cfg = ExperimentConfig::load(path).map_err(Failure::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.traj {
        if n == 0 {
            return Err(Failure::Config(Error::Config {
                line: None,
                key: "--traj".into(),
                message: "must be at least 1".into(),
            }));
        }
        cfg.ensemble_size = n;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
            }
            std::fs::write(p, text).map_err(|e| Error::Io { path: p.into(), source: e })?;
            Ok(())
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(Error::Io { path: "<stdout>".into(), source: e })),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let threads = common.threads;
    match cli.command {
        Command::Simulate => {
            let cfg = load(common)?;
            let sim = bdspde::solver::Simulator::new(cfg.coefficient_set()?, cfg.solver_config()?)?;
            let init = cfg.initial_state()?;
            let rec = harness::with_threads(threads, || sim.simulate(&init.u, &init.v, 0, cfg.seed))??;
            emit(cfg.output.as_deref(), &harness::trajectory_csv(&cfg, 0, &rec))
        }
        Command::Ensemble => {
            let cfg = load(common)?;
            let out = match &cfg.output {
                Some(path) => harness::with_threads(threads, || harness::write_ensemble(&cfg, path))??,
                None => {
                    let out = harness::with_threads(threads, || harness::run_ensemble(&cfg))??;
                    emit(None, &harness::ensemble_csv(&cfg, &out))?;
                    out
                }
            };
            eprintln!(
                "{} trajectories, verdict {}, max relative clipped mass {:.2e}",
                out.stats.n_traj, out.report.verdict, out.max_relative_clip
            );
            Ok(())
        }
        Command::Thresholds => {
            let cfg = load(common)?;
            let report = classify(&cfg.coefficient_set()?, &cfg.noise_spec()?);
            emit(common.out.as_deref(), &harness::report_text(&report))
        }
        Command::Validate => {
            let mut opts = ValidationOptions::default();
            if let Some(n) = common.traj {
                opts.ensemble_size = n.max(2);
            }
            if let Some(seed) = common.seed {
                opts.seed = seed;
            }
            let report = harness::with_threads(threads, || harness::run_validation(&opts))?;
            emit(common.out.as_deref(), &report.table())?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
