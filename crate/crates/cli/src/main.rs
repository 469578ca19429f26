use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use scnls_core::harness::{
    run_criterion, run_ensemble, run_groundstate, run_single, threshold_study, verify, RunConfig,
};
use scnls_core::Error;

/// Stochastic coupled NLS simulator.
#[derive(Parser, Debug)]
#[command(name = "scnls", version)]
struct Cli {
    /// Overrides `[run] output_dir`.
    #[arg(long, global = true, env = "SCNLS_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one path. Exits 2 when the blow-up detector fires.
    Simulate { config: PathBuf },
    /// Run a Monte Carlo ensemble.
    Ensemble {
        config: PathBuf,
        #[arg(long, default_value_t = 16)]
        paths: usize,
        #[arg(long, env = "SCNLS_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Solve both ground-state branches and report the sharp constant.
    Groundstate { config: PathBuf },
    /// Check conservation laws and identities at dt and dt/2.
    Verify { config: PathBuf },
    /// Evaluate the blow-up criterion on the initial data.
    Criterion {
        config: PathBuf,
        #[arg(long = "tbar", allow_negative_numbers = true)]
        t_bar: Option<f64>,
    },
    /// Sweep ensembles over rescaled initial masses.
    Threshold {
        config: PathBuf,
        /// Target mass combinations; defaults to `[threshold] masses`.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, env = "SCNLS_WORKERS", default_value_t = 1)]
        workers: usize,
    },
}

impl Command {
    fn config_path(&self) -> &Path {
        match self {
            Command::Simulate { config }
            | Command::Ensemble { config, .. }
            | Command::Groundstate { config }
            | Command::Verify { config }
            | Command::Criterion { config, .. }
            | Command::Threshold { config, .. } => config,
        }
    }
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli, mut cfg: RunConfig) -> anyhow::Result<u8> {
    if let Some(dir) = cli.output_dir {
        cfg.run.output_dir = dir;
    }
    match cli.command {
        Command::Simulate { .. } => {
            let report = run_single(&cfg)?;
            let last = report.trajectory.rows.last().context("empty trajectory")?;
            print_json(&serde_json::json!({
                "outcome": report.outcome,
                "t_end": last.t,
                "steps": report.trajectory.steps_taken,
                "trajectory": report.trajectory_csv,
                "manifest": report.manifest,
            }))?;
            Ok(report.exit_code() as u8)
        }
        Command::Ensemble { paths, workers, .. } => {
            let result = run_ensemble(&cfg, paths, workers)?;
            print_json(&result)?;
            Ok(0)
        }
        Command::Groundstate { .. } => {
            let (report, _) = run_groundstate(&cfg)?;
            print_json(&report)?;
            Ok(0)
        }
        Command::Verify { .. } => {
            let report = verify(&cfg)?;
            print_json(&report)?;
            Ok(if report.all_pass { 0 } else { 3 })
        }
        Command::Criterion { t_bar, .. } => {
            let t_bar = t_bar.unwrap_or_else(|| cfg.criterion_horizon());
            let (report, _) = run_criterion(&cfg, t_bar)?;
            print_json(&report)?;
            Ok(0)
        }
        Command::Threshold {
            masses,
            paths,
            workers,
            ..
        } => {
            let spec = cfg.threshold.as_ref();
            let masses = masses
                .or_else(|| spec.map(|s| s.masses.clone()))
                .unwrap_or_default();
            let paths = paths.or(spec.map(|s| s.paths)).unwrap_or(8);
            let study = threshold_study(&cfg, &masses, paths, workers)?;
            print_json(&study)?;
            Ok(0)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config_error() => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors share exit code 1 with other configuration errors.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    let path = cli.command.config_path();
    // An unreadable or malformed config is a configuration error.
    let cfg = match RunConfig::load(path).with_context(|| format!("loading {}", path.display())) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(1);
        }
    };
    match run(cli, cfg) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
