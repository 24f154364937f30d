//! Drive one integrator over the configured run and collect the series that
//! the output files are made of.

use discrete_routh::diagnostics::{cotangent_energy, reduced_state_energy, rk4_run};
use discrete_routh::discrete::{del_run, discrete_momentum, legendre_transforms, midpoint_ld, seed_pair};
use discrete_routh::reduction::{
    dr_run, lift_cotangent, reconstruct, reduce_lagrangian, reduced_legendre, reduced_legendre_minus, reduced_seed,
    rsprk_step_with_group, wrap_shape, ConnectionOneForm, ReducedCotangentState,
};
use discrete_routh::sprk::{gauss_tableau, sprk_run, CotangentState};
use discrete_routh::trajectory::{integrate, Trajectory};
use discrete_routh::{Error, MechanicalSystem, ReducedSystem, Result};
use nalgebra::DVector;

use crate::config::{Method, RunConfig};
use crate::model::{InitialData, Model};

/// Everything one run produced, truncated at the first failure.
#[derive(Debug, Clone)]
pub struct Run {
    pub h: f64,
    pub method: Method,
    pub mu: f64,
    /// Coordinates followed by momenta, one entry per step.
    pub rows: Vec<DVector<f64>>,
    /// Unwrapped shape point of each row.
    pub shapes: Vec<DVector<f64>>,
    pub energies: Vec<f64>,
    /// Momentum map values: one per configuration pair for `del` and `dr`,
    /// one per row otherwise. Empty for reduced methods unless requested.
    pub momenta: Vec<DVector<f64>>,
    /// Reconstructed group coordinate; reduced methods only, when requested.
    pub group: Vec<DVector<f64>>,
    pub failure: Option<Error>,
}

impl Run {
    fn new(cfg: &RunConfig, mu: f64) -> Self {
        Self {
            h: cfg.h,
            method: cfg.method,
            mu,
            rows: Vec::with_capacity(cfg.steps + 1),
            shapes: Vec::with_capacity(cfg.steps + 1),
            energies: Vec::with_capacity(cfg.steps + 1),
            momenta: Vec::new(),
            group: Vec::new(),
            failure: None,
        }
    }

    pub fn last_step(&self) -> Option<usize> {
        self.rows.len().checked_sub(1)
    }

    fn fail(&mut self, e: Error) {
        self.failure.get_or_insert(e);
    }

    /// Append a row unless it or its energy is unusable, in which case the
    /// run is marked as failed and `false` is returned.
    fn push(&mut self, coords: &DVector<f64>, momenta: &DVector<f64>, shape: DVector<f64>, energy: Result<f64>) -> bool {
        let energy = match energy {
            Ok(e) => e,
            Err(e) => {
                self.fail(e);
                return false;
            }
        };
        let row = DVector::from_iterator(coords.len() + momenta.len(), coords.iter().chain(momenta.iter()).copied());
        if !energy.is_finite() || row.iter().any(|v| !v.is_finite()) {
            self.fail(Error::NonFiniteValue(format!("state at step {}", self.rows.len())));
            return false;
        }
        self.rows.push(row);
        self.shapes.push(shape);
        self.energies.push(energy);
        true
    }

    fn absorb<T>(&mut self, traj: &Trajectory<T>) {
        if let Some(e) = &traj.failure {
            self.fail(e.clone());
        }
    }

    /// Cut the per-row series back to `len` rows.
    fn truncate(&mut self, len: usize) {
        self.rows.truncate(len);
        self.shapes.truncate(len);
        self.energies.truncate(len);
    }
}

/// Run the configured method. `with_group` asks reduced methods to rebuild
/// the group coordinate (needed for reconstruction and momentum output).
pub fn simulate(cfg: &RunConfig, model: &Model, data: &InitialData, with_group: bool) -> Run {
    let mut run = Run::new(cfg, data.mu);
    match cfg.method {
        Method::Del => run_del(&mut run, model, data, cfg),
        Method::Sprk | Method::Rk4 => run_cotangent(&mut run, model, data, cfg),
        Method::Dr => run_dr(&mut run, model, data, cfg, with_group),
        Method::Rsprk => run_rsprk(&mut run, model, data, cfg, with_group),
    }
    run
}

fn group_momentum(sys: &dyn MechanicalSystem, p: &DVector<f64>) -> DVector<f64> {
    sys.group_basis().transpose() * p
}

fn run_del(run: &mut Run, model: &Model, data: &InitialData, cfg: &RunConfig) {
    let sys = model.system();
    let ld = match midpoint_ld(sys, cfg.h) {
        Ok(ld) => ld,
        Err(e) => return run.fail(e),
    };
    let q1 = match seed_pair(&ld, &data.q0, &data.qdot0) {
        Ok(q1) => q1,
        Err(e) => {
            let p0 = sys.dl_dqdot(&data.q0, &data.qdot0);
            if let Ok(p0) = p0 {
                let energy = sys.energy(&data.q0, &data.qdot0);
                run.push(&data.q0, &p0, data.x0.clone(), energy);
            }
            return run.fail(e);
        }
    };
    let traj = del_run(&ld, &data.q0, &q1, cfg.steps - 1);
    let qs = &traj.states;
    for k in 0..qs.len() {
        let p = if k + 1 < qs.len() {
            legendre_transforms(&ld, &qs[k], &qs[k + 1]).map(|(p0, _)| p0)
        } else {
            legendre_transforms(&ld, &qs[k - 1], &qs[k]).map(|(_, p1)| p1)
        };
        let p = match p {
            Ok(p) => p,
            Err(e) => {
                run.fail(e);
                break;
            }
        };
        let energy = cotangent_energy(sys, &CotangentState::new(qs[k].clone(), p.clone()));
        if !run.push(&qs[k], &p, sys.shape_of(&qs[k]), energy) {
            break;
        }
    }
    run.absorb(&traj);
    for w in qs[..run.rows.len()].windows(2) {
        match discrete_momentum(&ld, &w[0], &w[1]) {
            Ok(j) => run.momenta.push(j),
            Err(e) => {
                run.fail(e);
                break;
            }
        }
    }
}

fn run_cotangent(run: &mut Run, model: &Model, data: &InitialData, cfg: &RunConfig) {
    let sys = model.system();
    let initial = match CotangentState::from_velocity(sys, &data.q0, &data.qdot0) {
        Ok(s) => s,
        Err(e) => return run.fail(e),
    };
    let traj = if cfg.method == Method::Rk4 {
        rk4_run(sys, &initial, cfg.h, cfg.steps)
    } else {
        match gauss_tableau(cfg.order as usize / 2) {
            Ok(tab) => sprk_run(sys, &tab, &initial, cfg.h, cfg.steps),
            Err(e) => return run.fail(e),
        }
    };
    for st in &traj.states {
        if !run.push(&st.q, &st.p, sys.shape_of(&st.q), cotangent_energy(sys, st)) {
            break;
        }
        run.momenta.push(group_momentum(sys, &st.p));
    }
    run.absorb(&traj);
}

fn run_dr(run: &mut Run, model: &Model, data: &InitialData, cfg: &RunConfig, with_group: bool) {
    let sys = model.system();
    let reduced = model.reduced(data.mu);
    let mu = DVector::from_element(1, data.mu);
    let ld = match midpoint_ld(sys, cfg.h) {
        Ok(ld) => ld,
        Err(e) => return run.fail(e),
    };
    let lhat = reduce_lagrangian(&ld, &mu);
    let aform = ConnectionOneForm::new(reduced.as_ref());
    let state0 = match ReducedCotangentState::from_velocity(reduced.as_ref(), &data.x0, &data.xdot0) {
        Ok(s) => s,
        Err(e) => return run.fail(e),
    };
    let x1 = match reduced_seed(&lhat, &aform, &state0) {
        Ok(x1) => x1,
        Err(e) => {
            let energy = reduced_state_energy(reduced.as_ref(), &state0);
            run.push(&wrap_shape(sys, &state0.x), &state0.s, state0.x.clone(), energy);
            return run.fail(e);
        }
    };
    let traj = dr_run(&lhat, &aform, &data.x0, &x1, cfg.steps - 1);
    let xs = &traj.states;
    for k in 0..xs.len() {
        let st = if k + 1 < xs.len() {
            reduced_legendre_minus(&lhat, &aform, &xs[k], &xs[k + 1])
        } else {
            reduced_legendre(&lhat, &aform, &xs[k - 1], &xs[k])
        };
        let st = match st {
            Ok(st) => st,
            Err(e) => {
                run.fail(e);
                break;
            }
        };
        let energy = reduced_state_energy(reduced.as_ref(), &st);
        if !run.push(&wrap_shape(sys, &st.x), &st.s, st.x.clone(), energy) {
            break;
        }
    }
    run.absorb(&traj);
    if !with_group || run.rows.len() < 2 {
        return;
    }

    let dg = match lhat.delta_g(&xs[0], &xs[1], None) {
        Ok(dg) => dg,
        Err(e) => return run.fail(e),
    };
    let q0 = sys.lift(&xs[0], &data.g0);
    let q1 = sys.lift(&xs[1], &(&data.g0 + dg));
    let shape = Trajectory::new(cfg.h, xs[..run.rows.len()].to_vec());
    let rec = reconstruct(&shape, &q0, &q1, &ld, &mu);
    run.absorb(&rec);
    run.truncate(rec.len());
    run.group = rec.states.iter().map(|q| sys.group_of(q)).collect();
    for w in rec.states.windows(2) {
        match discrete_momentum(&ld, &w[0], &w[1]) {
            Ok(j) => run.momenta.push(j),
            Err(e) => {
                run.fail(e);
                break;
            }
        }
    }
}

fn run_rsprk(run: &mut Run, model: &Model, data: &InitialData, cfg: &RunConfig, with_group: bool) {
    let sys = model.system();
    let reduced = model.reduced(data.mu);
    let reduced: &dyn ReducedSystem = reduced.as_ref();
    let tab = match gauss_tableau(cfg.order as usize / 2) {
        Ok(tab) => tab,
        Err(e) => return run.fail(e),
    };
    let state0 = match ReducedCotangentState::from_velocity(reduced, &data.x0, &data.xdot0) {
        Ok(s) => s,
        Err(e) => return run.fail(e),
    };
    let traj = integrate(cfg.h, (state0, data.g0.clone()), cfg.steps, |(st, g)| {
        rsprk_step_with_group(reduced, &tab, st, cfg.h).map(|o| (o.state, g + o.delta_g))
    });
    for (st, g) in &traj.states {
        if !run.push(&wrap_shape(sys, &st.x), &st.s, st.x.clone(), reduced_state_energy(reduced, st)) {
            break;
        }
        if with_group {
            match lift_cotangent(sys, reduced, st, g) {
                Ok(full) => run.momenta.push(group_momentum(sys, &full.p)),
                Err(e) => {
                    run.fail(e);
                    run.truncate(run.group.len());
                    break;
                }
            }
            run.group.push(g.clone());
        }
    }
    run.absorb(&traj);
}
