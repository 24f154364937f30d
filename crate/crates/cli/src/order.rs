//! Empirical convergence order of the configured method.

use std::fs;
use std::path::{Path, PathBuf};

use discrete_routh::diagnostics::{order_study, OrderReport};
use discrete_routh::reduction::shape_distance;
use discrete_routh::Error;
use nalgebra::DVector;

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::model::{InitialData, Model};
use crate::output::{csv_error, csv_writer, ensure_dir, number};
use crate::run::{simulate, Run};

pub const ORDER_FILE: &str = "order.csv";

/// The reference solution uses an order-4 method at this fraction of the
/// smallest step.
pub const REFERENCE_REFINEMENT: usize = 10;

const STEP_FIT_TOL: f64 = 1e-9;

pub fn default_step_sizes(h: f64) -> Vec<f64> {
    vec![h, h / 2.0, h / 4.0, h / 8.0]
}

fn steps_for(t_end: f64, h: f64) -> CliResult<usize> {
    let n = (t_end / h).round();
    if n < 1.0 || (n * h - t_end).abs() > STEP_FIT_TOL * t_end {
        return Err(CliError::config(format!("step size {h} does not divide the final time {t_end}")));
    }
    Ok(n as usize)
}

/// Final configuration (full methods) or shape point (reduced methods).
fn final_point(run: &Run, full_dim: usize) -> std::result::Result<DVector<f64>, Error> {
    if let Some(e) = &run.failure {
        return Err(e.clone());
    }
    let last = run.rows.len() - 1;
    Ok(if run.method.is_reduced() { run.shapes[last].clone() } else { run.rows[last].rows(0, full_dim).into_owned() })
}

pub fn order(cfg: &RunConfig, step_sizes: &[f64]) -> CliResult<OrderReport> {
    if step_sizes.len() < 2 || step_sizes.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(CliError::config("order needs at least two positive step sizes"));
    }
    if step_sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::config("step sizes must be strictly decreasing"));
    }
    let model = Model::new(cfg)?;
    let data = InitialData::new(&model, cfg)?;
    let t_end = cfg.final_time();
    let steps = step_sizes.iter().map(|&h| steps_for(t_end, h)).collect::<CliResult<Vec<usize>>>()?;

    let mut reference_cfg = cfg.clone();
    reference_cfg.method = if cfg.method.is_reduced() { Method::Rsprk } else { Method::Sprk };
    reference_cfg.order = 4;
    reference_cfg.steps = steps[steps.len() - 1] * REFERENCE_REFINEMENT;
    reference_cfg.h = t_end / reference_cfg.steps as f64;
    let full_dim = model.system().dim();
    let reference = simulate(&reference_cfg, &model, &data, false);
    let reference = final_point(&reference, full_dim).map_err(|e| CliError::numerical(&e, None))?;

    let mask = if cfg.method.is_reduced() { model.system().shape_angle_mask() } else { vec![false; full_dim] };
    let error_at = |h: f64| -> discrete_routh::Result<f64> {
        let mut run_cfg = cfg.clone();
        run_cfg.h = h;
        run_cfg.steps = steps_for(t_end, h).expect("validated above");
        let run = simulate(&run_cfg, &model, &data, false);
        Ok(shape_distance(&mask, &final_point(&run, full_dim)?, &reference))
    };
    order_study(step_sizes, error_at).map_err(|e| CliError::numerical(&e, None))
}

pub fn write_order(dir: &Path, cfg: &RunConfig, report: &OrderReport) -> CliResult<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join(ORDER_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["h", "steps", "error"]).map_err(|e| csv_error(&path, e))?;
    for (h, e) in report.step_sizes.iter().zip(&report.errors) {
        let steps = (cfg.final_time() / h).round() as usize;
        w.write_record([number(*h), steps.to_string(), number(*e)]).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
    let summary = dir.join("order.txt");
    let text = format!("method = {}\nexpected_order = {}\nslope = {}\n", cfg.method, cfg.order, number(report.slope));
    fs::write(&summary, text).map_err(|source| CliError::Io { path: summary.clone(), source })?;
    Ok(vec![path, summary])
}
