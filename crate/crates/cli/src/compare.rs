//! Paired runs of one system under two configurations.

use std::fs;
use std::path::{Path, PathBuf};

use discrete_routh::diagnostics::{energy_drift, energy_drift_absolute, DriftReport};
use discrete_routh::reduction::shape_distance;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::model::{InitialData, Model};
use crate::output::{csv_error, csv_writer, ensure_dir, number};
use crate::run::{simulate, Run};

pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare.txt";

/// Relative tolerance on the final times of the two runs.
const FINAL_TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Comparison {
    /// `(step, t, drift_a, drift_b, shape distance)` on the coarser grid.
    pub rows: Vec<(usize, f64, f64, f64, f64)>,
    pub drift_a: DriftReport,
    pub drift_b: DriftReport,
    pub max_shape_distance: f64,
}

fn drift(run: &Run) -> DriftReport {
    energy_drift(run.h, &run.energies).unwrap_or_else(|_| energy_drift_absolute(run.h, &run.energies))
}

/// Steps of the finer run per step of the coarser one, and which run is
/// coarse (`true` for `a`).
fn grid(a: &RunConfig, b: &RunConfig) -> CliResult<(usize, bool)> {
    if a.system != b.system || a.j2 != b.j2 || a.dsp != b.dsp {
        return Err(CliError::config("compared runs must use the same system and parameters"));
    }
    let (ta, tb) = (a.final_time(), b.final_time());
    if (ta - tb).abs() > FINAL_TIME_TOL * ta.max(tb) {
        return Err(CliError::config(format!("compared runs must share the final time, got {ta} and {tb}")));
    }
    let (coarse, fine, a_coarse) = if a.steps <= b.steps { (a, b, true) } else { (b, a, false) };
    if fine.steps % coarse.steps != 0 {
        return Err(CliError::config(format!(
            "step counts {} and {} are not commensurate",
            coarse.steps, fine.steps
        )));
    }
    Ok((fine.steps / coarse.steps, a_coarse))
}

pub fn compare(a: &RunConfig, b: &RunConfig) -> CliResult<(Comparison, Option<(Run, Run)>)> {
    let (ratio, a_coarse) = grid(a, b)?;
    let (model_a, model_b) = (Model::new(a)?, Model::new(b)?);
    let (data_a, data_b) = (InitialData::new(&model_a, a)?, InitialData::new(&model_b, b)?);
    let (run_a, run_b) = std::thread::scope(|scope| {
        let ha = scope.spawn(|| simulate(a, &model_a, &data_a, false));
        let hb = scope.spawn(|| simulate(b, &model_b, &data_b, false));
        (ha.join().expect("run a panicked"), hb.join().expect("run b panicked"))
    });
    let mask = model_a.system().shape_angle_mask();
    let (da, db) = (drift(&run_a), drift(&run_b));
    let (va, vb) = (da.values(), db.values());
    let coarse_h = if a_coarse { a.h } else { b.h };
    let (stride_a, stride_b) = if a_coarse { (1, ratio) } else { (ratio, 1) };
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    for k in 0.. {
        let (ia, ib) = (k * stride_a, k * stride_b);
        if ia >= va.len() || ib >= vb.len() {
            break;
        }
        let dist = shape_distance(&mask, &run_a.shapes[ia], &run_b.shapes[ib]);
        worst = worst.max(dist);
        rows.push((k, k as f64 * coarse_h, va[ia], vb[ib], dist));
    }
    let cmp = Comparison { rows, drift_a: da, drift_b: db, max_shape_distance: worst };
    let failed = run_a.failure.is_some() || run_b.failure.is_some();
    Ok((cmp, failed.then_some((run_a, run_b))))
}

pub fn write_comparison(dir: &Path, a: &RunConfig, b: &RunConfig, cmp: &Comparison) -> CliResult<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join(COMPARE_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["step", "t", "energy_drift_a", "energy_drift_b", "shape_distance"])
        .map_err(|e| csv_error(&path, e))?;
    for &(k, t, x, y, d) in &cmp.rows {
        w.write_record([k.to_string(), number(t), number(x), number(y), number(d)]).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;

    let summary = dir.join(COMPARE_SUMMARY_FILE);
    let text = [
        format!("method_a = {}", a.method),
        format!("method_b = {}", b.method),
        format!("h_a = {}", number(a.h)),
        format!("h_b = {}", number(b.h)),
        format!("energy_trend_a = {}", number(cmp.drift_a.linear_trend)),
        format!("energy_trend_error_a = {}", number(cmp.drift_a.trend_std_error)),
        format!("energy_trend_b = {}", number(cmp.drift_b.linear_trend)),
        format!("energy_trend_error_b = {}", number(cmp.drift_b.trend_std_error)),
        format!("max_abs_drift_a = {}", number(cmp.drift_a.max_abs)),
        format!("max_abs_drift_b = {}", number(cmp.drift_b.max_abs)),
        format!("max_shape_distance = {}", number(cmp.max_shape_distance)),
    ]
    .join("\n")
        + "\n";
    fs::write(&summary, text).map_err(|source| CliError::Io { path: summary.clone(), source })?;
    Ok(vec![path, summary])
}
