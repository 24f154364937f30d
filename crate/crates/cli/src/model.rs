use discrete_routh::systems::{DoubleSphericalPendulum, DspReduced, SatelliteJ2, SatelliteReduced};
use discrete_routh::{MechanicalSystem, ReducedSystem};
use nalgebra::DVector;

use crate::config::{InitialCondition, RunConfig, SystemKind, MU_MATCH_TOL};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub enum Model {
    Satellite(SatelliteJ2),
    Dsp(DoubleSphericalPendulum),
}

impl Model {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        let model = match cfg.system {
            SystemKind::Satellite => Model::Satellite(SatelliteJ2::new(cfg.j2).map_err(config_err)?),
            SystemKind::Dsp => Model::Dsp(DoubleSphericalPendulum::new(cfg.dsp).map_err(config_err)?),
        };
        Ok(model)
    }

    pub fn system(&self) -> &dyn MechanicalSystem {
        match self {
            Model::Satellite(s) => s,
            Model::Dsp(s) => s,
        }
    }

    pub fn reduced(&self, mu: f64) -> Box<dyn ReducedSystem> {
        match *self {
            Model::Satellite(s) => Box::new(SatelliteReduced::new(s, mu)),
            Model::Dsp(s) => Box::new(DspReduced::new(s, mu)),
        }
    }

    pub fn full_columns(&self) -> &'static [&'static str] {
        match self {
            Model::Satellite(_) => &["r", "theta", "z", "p_r", "p_theta", "p_z"],
            Model::Dsp(_) => &["r1", "theta1", "r2", "theta2", "p_r1", "p_theta1", "p_r2", "p_theta2"],
        }
    }

    pub fn reduced_columns(&self) -> &'static [&'static str] {
        match self {
            Model::Satellite(_) => &["r", "z", "s_r", "s_z"],
            Model::Dsp(_) => &["r1", "r2", "phi", "s_r1", "s_r2", "s_phi"],
        }
    }

    pub fn group_columns(&self) -> &'static [&'static str] {
        match self {
            Model::Satellite(_) => &["theta"],
            Model::Dsp(_) => &["theta1"],
        }
    }
}

fn config_err(e: discrete_routh::Error) -> CliError {
    CliError::config(e.to_string())
}

/// The initial condition in both the full and the reduced picture.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub q0: DVector<f64>,
    pub qdot0: DVector<f64>,
    pub x0: DVector<f64>,
    pub xdot0: DVector<f64>,
    pub g0: DVector<f64>,
    pub mu: f64,
}

impl InitialData {
    pub fn new(model: &Model, cfg: &RunConfig) -> CliResult<Self> {
        let sys = model.system();
        let data = match &cfg.ic {
            InitialCondition::Full { q, qdot } => {
                sys.check_chart(q).map_err(config_err)?;
                let mu = sys.momentum_map(q, qdot).map_err(config_err)?[0];
                if let Some(given) = cfg.mu {
                    if (given - mu).abs() > MU_MATCH_TOL * mu.abs().max(1.0) {
                        return Err(CliError::config(format!(
                            "mu = {given} does not match the momentum {mu} of the initial condition"
                        )));
                    }
                }
                Self {
                    q0: q.clone(),
                    qdot0: qdot.clone(),
                    x0: sys.shape_of(q),
                    xdot0: sys.shape_projection() * qdot,
                    g0: sys.group_of(q),
                    mu,
                }
            }
            InitialCondition::Reduced { x, xdot } => {
                let mu = cfg.mu.ok_or_else(|| CliError::config("a reduced initial condition needs mu"))?;
                let reduced = model.reduced(mu);
                reduced.check_shape(x).map_err(config_err)?;
                let gdot = reduced.group_velocity(x, xdot).map_err(config_err)?;
                let g0 = DVector::zeros(sys.group_dim());
                let q0 = sys.lift(x, &g0);
                sys.check_chart(&q0).map_err(config_err)?;
                let qdot0 = sys.shape_basis() * xdot + sys.group_basis() * gdot;
                Self { q0, qdot0, x0: x.clone(), xdot0: xdot.clone(), g0, mu }
            }
        };
        Ok(data)
    }
}
