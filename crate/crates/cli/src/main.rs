mod check;
mod compare;
mod config;
mod error;
mod model;
mod order;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, Settings};
use crate::error::{CliError, CliResult};
use crate::model::{InitialData, Model};

/// Discrete Routh reduction: simulate, compare and check variational and
/// reduced symplectic integrators.
#[derive(Debug, Parser)]
#[command(name = "routh", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write its CSV output.
    Simulate {
        /// `key = value` configuration file.
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run two configurations of the same system and write paired series.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the convergence order of the configured method.
    Order {
        config: Option<PathBuf>,
        /// Decreasing step sizes, comma separated; each must divide the
        /// final time `h·steps`.
        #[arg(long, value_delimiter = ',')]
        hs: Option<Vec<f64>>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the invariant suites on the configured system and initial data.
    Check {
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
}

/// Overrides for configuration file values.
#[derive(Debug, Default, Args)]
struct RunFlags {
    /// satellite | dsp
    #[arg(long)]
    system: Option<String>,
    /// del | sprk | dr | rsprk | rk4
    #[arg(long)]
    method: Option<String>,
    /// 2 or 4
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    /// Oblateness coefficient of the satellite system.
    #[arg(long)]
    j2: Option<String>,
    /// File with the initial condition (`q`, `qdot` or `x`, `xdot`, `mu`).
    #[arg(long)]
    ic: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma separated subset of trajectory, energy, momentum, reconstruction.
    #[arg(long)]
    emit: Option<String>,
}

fn load(config: Option<&Path>, flags: &RunFlags) -> CliResult<RunConfig> {
    let mut settings = match config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(ic) = &flags.ic {
        settings.merge_ic_file(ic)?;
    }
    let text_flags = [
        ("system", &flags.system),
        ("method", &flags.method),
        ("order", &flags.order),
        ("h", &flags.h),
        ("steps", &flags.steps),
        ("mu", &flags.mu),
        ("j2", &flags.j2),
        ("emit", &flags.emit),
    ];
    for (key, value) in text_flags {
        if let Some(v) = value {
            settings.set(key, v.clone());
        }
    }
    if let Some(out) = &flags.out {
        settings.set("out", out.display().to_string());
    }
    settings.to_config()
}

fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let model = Model::new(cfg)?;
    let data = InitialData::new(&model, cfg)?;
    let with_group = cfg.emit.contains(&config::Emit::Reconstruction) || cfg.emit.contains(&config::Emit::Momentum);
    let result = run::simulate(cfg, &model, &data, with_group);
    for path in output::write_run(cfg, &model, &result)? {
        println!("wrote {}", path.display());
    }
    match &result.failure {
        Some(e) => Err(CliError::numerical(e, result.last_step())),
        None => Ok(()),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, flags } => simulate(&load(config.as_deref(), &flags)?),
        Command::Compare { first, second, out } => {
            let a = Settings::from_file(&first)?.to_config()?;
            let b = Settings::from_file(&second)?.to_config()?;
            let dir = out.unwrap_or_else(|| a.out.clone());
            let (cmp, failed) = compare::compare(&a, &b)?;
            for path in compare::write_comparison(&dir, &a, &b, &cmp)? {
                println!("wrote {}", path.display());
            }
            println!("energy trend a = {:.6e}, b = {:.6e}", cmp.drift_a.linear_trend, cmp.drift_b.linear_trend);
            println!("max shape distance = {:.6e}", cmp.max_shape_distance);
            match failed {
                Some((ra, rb)) => {
                    let (run, which) = if ra.failure.is_some() { (ra, "first") } else { (rb, "second") };
                    let e = run.failure.clone().expect("one run failed");
                    eprintln!("{which} run failed");
                    Err(CliError::numerical(&e, run.last_step()))
                }
                None => Ok(()),
            }
        }
        Command::Order { config, hs, flags } => {
            let cfg = load(config.as_deref(), &flags)?;
            let hs = hs.unwrap_or_else(|| order::default_step_sizes(cfg.h));
            let report = order::order(&cfg, &hs)?;
            for path in order::write_order(&cfg.out, &cfg, &report)? {
                println!("wrote {}", path.display());
            }
            for (h, e) in report.step_sizes.iter().zip(&report.errors) {
                println!("h = {h:.6e}  error = {e:.6e}");
            }
            println!("slope = {:.4} (expected {})", report.slope, cfg.order);
            Ok(())
        }
        Command::Check { config, flags } => {
            let cfg = load(config.as_deref(), &flags)?;
            let outcomes = check::run_checks(&cfg)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed()).count();
            if failed > 0 {
                Err(CliError::CheckFailed(failed))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
