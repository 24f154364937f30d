//! Discrete Lagrangians, the discrete Euler–Lagrange (DEL) map, the discrete
//! momentum map and the discrete Legendre transforms.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::newton::{newton_solve, NewtonOptions};
use crate::system::{ensure_finite, MechanicalSystem};
use crate::trajectory::Trajectory;

/// A function `L_d(q0, q1)` on pairs of configurations approximating the
/// action over one step of length `h`.
pub trait DiscreteLagrangian: Send + Sync {
    fn h(&self) -> f64;

    fn system(&self) -> &dyn MechanicalSystem;

    fn eval(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<f64>;

    /// Derivative in the first slot, `D₁L_d`.
    fn d1(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<DVector<f64>>;

    /// Derivative in the second slot, `D₂L_d`.
    fn d2(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Midpoint rule `L_d(q0, q1) = h·L((q0+q1)/2, (q1−q0)/h)`.
#[derive(Clone, Copy)]
pub struct MidpointLagrangian<'a> {
    system: &'a dyn MechanicalSystem,
    h: f64,
}

impl<'a> MidpointLagrangian<'a> {
    pub fn new(system: &'a dyn MechanicalSystem, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::StepRejected(format!("time step must be positive, got {h}")));
        }
        Ok(Self { system, h })
    }

    fn chord(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        ((q0 + q1) * 0.5, (q1 - q0) / self.h)
    }
}

/// Convenience constructor mirroring [`MidpointLagrangian::new`].
pub fn midpoint_ld(system: &dyn MechanicalSystem, h: f64) -> Result<MidpointLagrangian<'_>> {
    MidpointLagrangian::new(system, h)
}

impl DiscreteLagrangian for MidpointLagrangian<'_> {
    fn h(&self) -> f64 {
        self.h
    }

    fn system(&self) -> &dyn MechanicalSystem {
        self.system
    }

    fn eval(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<f64> {
        let (qm, v) = self.chord(q0, q1);
        Ok(self.h * self.system.lagrangian(&qm, &v)?)
    }

    fn d1(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<DVector<f64>> {
        let (qm, v) = self.chord(q0, q1);
        let lq = self.system.dl_dq(&qm, &v)?;
        let lv = self.system.dl_dqdot(&qm, &v)?;
        Ok(lq * (0.5 * self.h) - lv)
    }

    fn d2(&self, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<DVector<f64>> {
        let (qm, v) = self.chord(q0, q1);
        let lq = self.system.dl_dq(&qm, &v)?;
        let lv = self.system.dl_dqdot(&qm, &v)?;
        Ok(lq * (0.5 * self.h) + lv)
    }
}

fn rejected(err: Error) -> Error {
    match err {
        Error::SingularConfiguration(msg) => Error::StepRejected(msg),
        other => other,
    }
}

/// Solve `D₂L_d(q_prev, q_cur) + D₁L_d(q_cur, q_next) = 0` for `q_next`.
///
/// The default guess is the linear extrapolation `2q_cur − q_prev`.
pub fn del_step(
    ld: &dyn DiscreteLagrangian,
    q_prev: &DVector<f64>,
    q_cur: &DVector<f64>,
    guess: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let sys = ld.system();
    let p_cur = ld.d2(q_prev, q_cur)?;
    let start = guess.cloned().unwrap_or_else(|| q_cur * 2.0 - q_prev);
    let residual = |q: &DVector<f64>| {
        sys.check_chart(q)?;
        Ok(&p_cur + ld.d1(q_cur, q)?)
    };
    let sol = newton_solve(residual, &start, &NewtonOptions::default())?;
    ensure_finite(&sol.x, "DEL step")?;
    sys.check_chart(&sol.x).map_err(rejected)?;
    Ok(sol.x)
}

/// Discrete momentum map `J_d(q0, q1) = Tgᵀ D₂L_d(q0, q1)`.
pub fn discrete_momentum(ld: &dyn DiscreteLagrangian, q0: &DVector<f64>, q1: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(ld.system().group_basis().transpose() * ld.d2(q0, q1)?)
}

/// Discrete Legendre transforms `(p0, p1) = (−D₁L_d, D₂L_d)`.
pub fn legendre_transforms(
    ld: &dyn DiscreteLagrangian,
    q0: &DVector<f64>,
    q1: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    Ok((-ld.d1(q0, q1)?, ld.d2(q0, q1)?))
}

/// Inverse of the minus Legendre transform: the `q1` with `−D₁L_d(q0, q1) = p0`.
///
/// This turns a cotangent initial condition into a seed pair for DEL runs.
pub fn seed_from_momentum(ld: &dyn DiscreteLagrangian, q0: &DVector<f64>, p0: &DVector<f64>) -> Result<DVector<f64>> {
    let sys = ld.system();
    let v0 = sys.velocity_from_momentum(q0, p0)?;
    let guess = q0 + v0 * ld.h();
    let residual = |q1: &DVector<f64>| {
        sys.check_chart(q1)?;
        Ok(ld.d1(q0, q1)? + p0)
    };
    let sol = newton_solve(residual, &guess, &NewtonOptions::default())?;
    sys.check_chart(&sol.x).map_err(rejected)?;
    Ok(sol.x)
}

/// Seed pair `(q0, q1)` from a position and velocity, matching the initial
/// momentum `∂L/∂q̇(q0, q̇0)` exactly through the discrete Legendre transform.
pub fn seed_pair(ld: &dyn DiscreteLagrangian, q0: &DVector<f64>, qdot0: &DVector<f64>) -> Result<DVector<f64>> {
    let p0 = ld.system().dl_dqdot(q0, qdot0)?;
    seed_from_momentum(ld, q0, &p0)
}

/// Run `steps` DEL steps from the seed pair `(q0, q1)`.
///
/// The trajectory holds the configurations `q_0, …, q_{steps+1}`; entry `k`
/// sits at time `k·h`. A failing step ends the run and is recorded in
/// [`Trajectory::failure`].
///
/// Each step is solved in the frame translated along the symmetry group so
/// that the current group coordinate is zero, and the stored configurations
/// are accumulated with compensated summation. Long runs whose group
/// coordinates grow large therefore keep the discrete momentum at roundoff
/// level instead of letting the rounding of each stored point accumulate.
pub fn del_run(ld: &dyn DiscreteLagrangian, q0: &DVector<f64>, q1: &DVector<f64>, steps: usize) -> Trajectory<DVector<f64>> {
    let sys = ld.system();
    let tg = sys.group_basis();
    let mut traj = Trajectory::new(ld.h(), vec![q0.clone(), q1.clone()]);
    let mut lo_prev = DVector::zeros(q0.len());
    let mut lo_cur = DVector::zeros(q0.len());
    for _ in 0..steps {
        let n = traj.states.len();
        let (hi_prev, hi_cur) = (&traj.states[n - 2], &traj.states[n - 1]);
        let offset = &tg * sys.group_of(hi_cur);
        let local_prev = (hi_prev - &offset) + &lo_prev;
        let local_cur = (hi_cur - &offset) + &lo_cur;
        match del_step(ld, &local_prev, &local_cur, None) {
            Ok(local_next) => {
                let (hi, lo) = two_sum(&offset, &local_next);
                traj.states.push(hi);
                lo_prev = std::mem::replace(&mut lo_cur, lo);
            }
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj
}

/// Componentwise error-free sum: `a + b = hi + lo` exactly.
fn two_sum(a: &DVector<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let hi = a + b;
    let lo = DVector::from_fn(a.len(), |i, _| {
        let bb = hi[i] - a[i];
        (a[i] - (hi[i] - bb)) + (b[i] - bb)
    });
    (hi, lo)
}
