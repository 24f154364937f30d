use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use csv::{Terminator, Writer, WriterBuilder};

use crate::config::{Emit, RunConfig};
use crate::error::{CliError, CliResult};
use crate::model::Model;
use crate::run::Run;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ENERGY_FILE: &str = "energy.csv";
pub const MOMENTUM_FILE: &str = "momentum.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn number(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

pub fn csv_writer(path: &Path) -> CliResult<Writer<File>> {
    WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_path(path).map_err(|e| csv_error(path, e))
}

pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

/// Write the CSV files requested by `cfg.emit` plus the run summary; returns
/// the paths written.
pub fn write_run(cfg: &RunConfig, model: &Model, run: &Run) -> CliResult<Vec<PathBuf>> {
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    if cfg.emit.contains(&Emit::Trajectory) || cfg.emit.contains(&Emit::Reconstruction) {
        let path = cfg.out.join(TRAJECTORY_FILE);
        write_trajectory(&path, cfg, model, run)?;
        written.push(path);
    }
    if cfg.emit.contains(&Emit::Energy) {
        let path = cfg.out.join(ENERGY_FILE);
        write_energy(&path, run)?;
        written.push(path);
    }
    if cfg.emit.contains(&Emit::Momentum) {
        let path = cfg.out.join(MOMENTUM_FILE);
        write_momentum(&path, run)?;
        written.push(path);
    }
    let path = cfg.out.join(SUMMARY_FILE);
    write_summary(&path, cfg, run)?;
    written.push(path);
    Ok(written)
}

fn write_trajectory(path: &Path, cfg: &RunConfig, model: &Model, run: &Run) -> CliResult<()> {
    let with_group = cfg.emit.contains(&Emit::Reconstruction);
    let columns = if cfg.method.is_reduced() { model.reduced_columns() } else { model.full_columns() };
    let mut header = vec!["step", "t"];
    header.extend_from_slice(columns);
    if with_group {
        header.extend_from_slice(model.group_columns());
    }
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (k, row) in run.rows.iter().enumerate() {
        let mut record = vec![k.to_string(), number(k as f64 * run.h)];
        record.extend(row.iter().map(|v| number(*v)));
        if with_group {
            record.extend(run.group[k].iter().map(|v| number(*v)));
        }
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_energy(path: &Path, run: &Run) -> CliResult<()> {
    let e0 = run.energies.first().copied().unwrap_or(0.0);
    let relative = e0 != 0.0;
    let drift_name = if relative { "relative_drift" } else { "absolute_drift" };
    let mut w = csv_writer(path)?;
    w.write_record(["step", "t", "energy", drift_name]).map_err(|e| csv_error(path, e))?;
    for (k, e) in run.energies.iter().enumerate() {
        let drift = if relative { (e - e0) / e0 } else { e - e0 };
        w.write_record([k.to_string(), number(k as f64 * run.h), number(*e), number(drift)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_momentum(path: &Path, run: &Run) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "t", "momentum", "deviation"]).map_err(|e| csv_error(path, e))?;
    if let Some(j0) = run.momenta.first() {
        for (k, j) in run.momenta.iter().enumerate() {
            let deviation = (j - j0).amax();
            w.write_record([k.to_string(), number(k as f64 * run.h), number(j[0]), number(deviation)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_summary(path: &Path, cfg: &RunConfig, run: &Run) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    let mut f = BufWriter::new(file);
    let status = if run.failure.is_some() { "numerical_failure" } else { "ok" };
    let last = run.last_step().map_or_else(|| "none".to_string(), |k| k.to_string());
    let mut lines = vec![
        format!("status = {status}"),
        format!("method = {}", cfg.method),
        format!("order = {}", cfg.order),
        format!("h = {}", number(cfg.h)),
        format!("steps_requested = {}", cfg.steps),
        format!("last_valid_step = {last}"),
        format!("mu = {}", number(run.mu)),
    ];
    if let Some(e) = &run.failure {
        lines.push(format!("error = {e}"));
    }
    for line in lines {
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}
