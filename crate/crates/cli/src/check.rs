//! Invariant suites run against the configured system and initial condition.

use discrete_routh::diagnostics::{
    canonical_form, commutation_del_dr, commutation_sprk_rsprk, momentum_drift, momentum_series_drift, reduced_form,
    symplectic_check, SYMPLECTIC_FD_SCALE,
};
use discrete_routh::discrete::{del_run, midpoint_ld, seed_pair};
use discrete_routh::reduction::{project_cotangent, rsprk_step, ReducedCotangentState};
use discrete_routh::sprk::{gauss_tableau, sprk_run, sprk_step, CotangentState};
use discrete_routh::Result;
use nalgebra::{DMatrix, DVector};

use crate::config::{Method, RunConfig};
use crate::error::CliResult;
use crate::model::{InitialData, Model};

pub const MOMENTUM_TOL: f64 = 1e-10;
pub const DEL_DR_TOL: f64 = 1e-9;
pub const SPRK_RSPRK_TOL: f64 = 1e-8;
pub const SYMPLECTIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl CheckOutcome {
    fn from_result(name: &'static str, tolerance: f64, value: Result<f64>) -> Self {
        match value {
            Ok(value) => Self { name, value, tolerance, error: None },
            Err(e) => Self { name, value: f64::NAN, tolerance, error: Some(e.to_string()) },
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.value <= self.tolerance
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{verdict} {}: {e}", self.name),
            None => format!("{verdict} {}: {:.3e} (tolerance {:.0e})", self.name, self.value, self.tolerance),
        }
    }
}

fn ready(initial: &Result<CotangentState>) -> Result<&CotangentState> {
    initial.as_ref().map_err(Clone::clone)
}

type Suite<'a> = (&'static str, f64, Box<dyn Fn() -> Result<f64> + Send + Sync + 'a>);

pub fn run_checks(cfg: &RunConfig) -> CliResult<Vec<CheckOutcome>> {
    let model = Model::new(cfg)?;
    let data = InitialData::new(&model, cfg)?;
    let sys = model.system();
    let reduced = model.reduced(data.mu);
    let (h, steps) = (cfg.h, cfg.steps);
    let stages = match cfg.method {
        Method::Sprk | Method::Rsprk => cfg.order as usize / 2,
        _ => 2,
    };
    let tab = gauss_tableau(stages).expect("stage count is 1 or 2");
    let initial = CotangentState::from_velocity(sys, &data.q0, &data.qdot0);
    let (data, reduced, tab, initial) = (&data, reduced.as_ref(), &tab, &initial);

    let suites: Vec<Suite<'_>> = vec![
        (
            "discrete momentum (DEL)",
            MOMENTUM_TOL,
            Box::new(move || {
                let ld = midpoint_ld(sys, h)?;
                let q1 = seed_pair(&ld, &data.q0, &data.qdot0)?;
                let traj = del_run(&ld, &data.q0, &q1, steps).into_result()?;
                Ok(momentum_drift(&traj, &ld)?.max_abs)
            }),
        ),
        (
            "conjugate momentum (SPRK)",
            MOMENTUM_TOL,
            Box::new(move || {
                let traj = sprk_run(sys, tab, ready(initial)?, h, steps).into_result()?;
                let momenta: Vec<DVector<f64>> =
                    traj.states.iter().map(|s| sys.group_basis().transpose() * &s.p).collect();
                Ok(momentum_series_drift(h, &momenta).max_abs)
            }),
        ),
        (
            "reduction commutes (DEL/DR)",
            DEL_DR_TOL,
            Box::new(move || {
                let ld = midpoint_ld(sys, h)?;
                let q1 = seed_pair(&ld, &data.q0, &data.qdot0)?;
                commutation_del_dr(&ld, reduced, &data.q0, &q1, steps)
            }),
        ),
        (
            "reduction commutes (SPRK/RSPRK)",
            SPRK_RSPRK_TOL,
            Box::new(move || commutation_sprk_rsprk(sys, reduced, tab, ready(initial)?, h, steps)),
        ),
        (
            "symplecticity (SPRK)",
            SYMPLECTIC_TOL,
            Box::new(move || {
                let z = ready(initial)?.to_vector();
                let step = |z: &DVector<f64>| sprk_step(sys, tab, &CotangentState::from_vector(z), h).map(|s| s.to_vector());
                symplectic_check(step, &z, |_| Ok(canonical_form(sys.dim())), SYMPLECTIC_FD_SCALE)
            }),
        ),
        (
            "symplecticity (RSPRK)",
            SYMPLECTIC_TOL,
            Box::new(move || {
                let d = sys.shape_dim();
                let z = project_cotangent(sys, reduced, ready(initial)?)?.to_vector();
                let step =
                    |z: &DVector<f64>| rsprk_step(reduced, tab, &ReducedCotangentState::from_vector(z), h).map(|s| s.to_vector());
                let form = |z: &DVector<f64>| -> Result<DMatrix<f64>> {
                    Ok(reduced_form(&reduced.beta_mu(&z.rows(0, d).into_owned())?))
                };
                symplectic_check(step, &z, form, SYMPLECTIC_FD_SCALE)
            }),
        ),
    ];

    let outcomes = std::thread::scope(|scope| {
        let handles: Vec<_> = suites
            .iter()
            .map(|(name, tol, suite)| scope.spawn(move || CheckOutcome::from_result(name, *tol, suite())))
            .collect();
        handles.into_iter().map(|h| h.join().expect("check suite panicked")).collect()
    });
    Ok(outcomes)
}
