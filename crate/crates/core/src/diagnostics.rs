//! Numerical checks of the structural properties of the integrators:
//! conservation of momentum and energy, symplecticity, commutation of
//! reduction with discretization, and convergence order.

use nalgebra::{DMatrix, DVector};

use crate::discrete::{del_run, discrete_momentum, DiscreteLagrangian};
use crate::error::{Error, Result};
use crate::reduction::{
    dr_run, project_cotangent, reduce_lagrangian, rsprk_run, shape_distance, ConnectionOneForm,
    ReducedCotangentState,
};
use crate::sprk::{sprk_run, ButcherTableau, CotangentState};
use crate::system::{MechanicalSystem, ReducedSystem};
use crate::trajectory::{integrate, Trajectory};

/// Default relative step for finite-difference Jacobians in
/// [`symplectic_check`]: `h_i = scale·(1 + |z_i|)`.
pub const SYMPLECTIC_FD_SCALE: f64 = 1e-5;

/// Energy `q̇·∂L/∂q̇ − L` of a velocity state.
pub fn energy(system: &dyn MechanicalSystem, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
    system.energy(q, qdot)
}

/// Energy of a cotangent state.
pub fn cotangent_energy(system: &dyn MechanicalSystem, state: &CotangentState) -> Result<f64> {
    let qdot = system.velocity_from_momentum(&state.q, &state.p)?;
    system.energy(&state.q, &qdot)
}

/// Energy of a reduced cotangent state; equals the unreduced energy of any
/// lift with momentum `μ`.
pub fn reduced_state_energy(reduced: &dyn ReducedSystem, state: &ReducedCotangentState) -> Result<f64> {
    let xdot = reduced.velocity_from_momentum(&state.x, &state.s)?;
    reduced.reduced_energy(&state.x, &xdot)
}

/// A scalar deviation series with its least-squares trend.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `(step index, time, value)`.
    pub series: Vec<(usize, f64, f64)>,
    pub max_abs: f64,
    /// Least-squares slope of value against time.
    pub linear_trend: f64,
    /// Standard error of `linear_trend`.
    pub trend_std_error: f64,
    /// Whether values are relative to the initial value.
    pub relative: bool,
}

impl DriftReport {
    /// Build a report from values sampled every `h`.
    pub fn from_values(h: f64, values: &[f64], relative: bool) -> Self {
        let series: Vec<(usize, f64, f64)> = values.iter().enumerate().map(|(k, v)| (k, k as f64 * h, *v)).collect();
        let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let (linear_trend, trend_std_error) = least_squares_slope(&series);
        Self { series, max_abs, linear_trend, trend_std_error, relative }
    }

    pub fn values(&self) -> Vec<f64> {
        self.series.iter().map(|s| s.2).collect()
    }
}

/// Slope and its standard error for `(·, t, y)` samples.
fn least_squares_slope(series: &[(usize, f64, f64)]) -> (f64, f64) {
    let n = series.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let tm = series.iter().map(|s| s.1).sum::<f64>() / nf;
    let ym = series.iter().map(|s| s.2).sum::<f64>() / nf;
    let sxx: f64 = series.iter().map(|s| (s.1 - tm).powi(2)).sum();
    let sxy: f64 = series.iter().map(|s| (s.1 - tm) * (s.2 - ym)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    if n < 3 {
        return (slope, 0.0);
    }
    let intercept = ym - slope * tm;
    let ssr: f64 = series.iter().map(|s| (s.2 - intercept - slope * s.1).powi(2)).sum();
    (slope, (ssr / (nf - 2.0) / sxx).sqrt())
}

/// `‖J_d(q_k, q_{k+1}) − J_d(q_0, q_1)‖_∞` along a configuration trajectory.
pub fn momentum_drift(traj: &Trajectory<DVector<f64>>, ld: &dyn DiscreteLagrangian) -> Result<DriftReport> {
    if traj.len() < 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: traj.len() });
    }
    let j0 = discrete_momentum(ld, &traj.states[0], &traj.states[1])?;
    let values = traj
        .states
        .windows(2)
        .map(|w| Ok((discrete_momentum(ld, &w[0], &w[1])? - &j0).amax()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DriftReport::from_values(traj.h, &values, false))
}

/// Deviation of a momentum series from its first entry.
pub fn momentum_series_drift(h: f64, momenta: &[DVector<f64>]) -> DriftReport {
    let values: Vec<f64> = match momenta.first() {
        Some(j0) => momenta.iter().map(|j| (j - j0).amax()).collect(),
        None => Vec::new(),
    };
    DriftReport::from_values(h, &values, false)
}

/// Relative energy drift `(E_k − E_0)/E_0`.
pub fn energy_drift(h: f64, energies: &[f64]) -> Result<DriftReport> {
    let e0 = *energies.first().ok_or(Error::DimensionMismatch { expected: 1, found: 0 })?;
    if e0 == 0.0 {
        return Err(Error::DivisionByZero);
    }
    let values: Vec<f64> = energies.iter().map(|e| (e - e0) / e0).collect();
    Ok(DriftReport::from_values(h, &values, true))
}

/// Absolute energy drift `E_k − E_0`, for runs with `E_0 = 0`.
pub fn energy_drift_absolute(h: f64, energies: &[f64]) -> DriftReport {
    let e0 = energies.first().copied().unwrap_or(0.0);
    let values: Vec<f64> = energies.iter().map(|e| e - e0).collect();
    DriftReport::from_values(h, &values, false)
}

/// Canonical symplectic matrix `[[0, I], [−I, 0]]` on `(q, p)`.
pub fn canonical_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Matrix of `Ω_S − π*β_μ` on `(x, s)`: `[[−B, I], [−I, 0]]`.
pub fn reduced_form(beta: &DMatrix<f64>) -> DMatrix<f64> {
    let d = beta.nrows();
    let mut w = canonical_form(d);
    w.view_mut((0, 0), (d, d)).copy_from(&(-beta));
    w
}

/// Jacobian by central differences with steps `scale·(1 + |z_i|)`.
pub fn step_jacobian<F>(step_map: &F, z: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = z.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = z.clone();
    for j in 0..n {
        let hj = scale * (1.0 + z[j].abs());
        probe[j] = z[j] + hj;
        let fp = step_map(&probe)?;
        probe[j] = z[j] - hj;
        let fm = step_map(&probe)?;
        probe[j] = z[j];
        jac.set_column(j, &((fp - fm) / (2.0 * hj)));
    }
    Ok(jac)
}

/// `‖Dφᵀ Ω(φ(z)) Dφ − Ω(z)‖_∞` for a one-step map `φ`.
pub fn symplectic_check<F, W>(step_map: F, z: &DVector<f64>, form_at: W, fd_scale: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    W: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let jac = step_jacobian(&step_map, z, fd_scale)?;
    let image = step_map(z)?;
    let lhs = jac.transpose() * form_at(&image)? * &jac;
    Ok((lhs - form_at(z)?).amax())
}

/// Classical explicit RK4 on `q̇ = ∂H/∂p`, `ṗ = ∂L/∂q`.
pub fn rk4_step(system: &dyn MechanicalSystem, state: &CotangentState, h: f64) -> Result<CotangentState> {
    let rhs = |q: &DVector<f64>, p: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        system.check_chart(q)?;
        let v = system.velocity_from_momentum(q, p)?;
        let f = system.dl_dq(q, &v)?;
        Ok((v, f))
    };
    let (q0, p0) = (&state.q, &state.p);
    let (k1q, k1p) = rhs(q0, p0)?;
    let (k2q, k2p) = rhs(&(q0 + &k1q * (0.5 * h)), &(p0 + &k1p * (0.5 * h)))?;
    let (k3q, k3p) = rhs(&(q0 + &k2q * (0.5 * h)), &(p0 + &k2p * (0.5 * h)))?;
    let (k4q, k4p) = rhs(&(q0 + &k3q * h), &(p0 + &k3p * h))?;
    let q1 = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
    let p1 = p0 + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
    system.check_chart(&q1)?;
    Ok(CotangentState::new(q1, p1))
}

pub fn rk4_run(system: &dyn MechanicalSystem, initial: &CotangentState, h: f64, steps: usize) -> Trajectory<CotangentState> {
    integrate(h, initial.clone(), steps, |s| rk4_step(system, s, h))
}

/// Max distance between `project(DEL)` and DR from the matched seed pair
/// `(q0, q1)`, over `steps` steps, with `μ = J_d(q0, q1)`.
pub fn commutation_del_dr(
    ld: &dyn DiscreteLagrangian,
    reduced: &dyn ReducedSystem,
    q0: &DVector<f64>,
    q1: &DVector<f64>,
    steps: usize,
) -> Result<f64> {
    let sys = ld.system();
    let mu = discrete_momentum(ld, q0, q1)?;
    if (&mu - reduced.mu()).amax() > 1e-8 {
        return Err(Error::MomentumMismatch { expected: reduced.mu().amax(), found: mu.amax() });
    }
    let full = del_run(ld, q0, q1, steps).into_result()?;
    let lhat = reduce_lagrangian(ld, &mu);
    let aform = ConnectionOneForm::new(reduced);
    let red = dr_run(&lhat, &aform, &sys.shape_of(q0), &sys.shape_of(q1), steps).into_result()?;
    let mask = sys.shape_angle_mask();
    Ok(full
        .states
        .iter()
        .zip(&red.states)
        .map(|(q, x)| shape_distance(&mask, &sys.shape_of(q), x))
        .fold(0.0, f64::max))
}

/// Max distance in `(x, s)` between `π_μ(SPRK)` and RSPRK from a matched
/// initial state.
pub fn commutation_sprk_rsprk(
    system: &dyn MechanicalSystem,
    reduced: &dyn ReducedSystem,
    tab: &ButcherTableau,
    initial: &CotangentState,
    h: f64,
    steps: usize,
) -> Result<f64> {
    let mu = system.group_basis().transpose() * &initial.p;
    if (&mu - reduced.mu()).amax() > 1e-8 {
        return Err(Error::MomentumMismatch { expected: reduced.mu().amax(), found: mu.amax() });
    }
    let full = sprk_run(system, tab, initial, h, steps).into_result()?;
    let red_init = project_cotangent(system, reduced, initial)?;
    let red = rsprk_run(reduced, tab, &red_init, h, steps).into_result()?;
    let mut mask = system.shape_angle_mask();
    mask.extend(vec![false; system.shape_dim()]);
    let mut worst = 0.0_f64;
    for (st, rs) in full.states.iter().zip(&red.states) {
        let proj = project_cotangent(system, reduced, st)?;
        worst = worst.max(shape_distance(&mask, &proj.to_vector(), &rs.to_vector()));
    }
    Ok(worst)
}

/// Global errors against step sizes with the log-log least-squares slope.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Fit the convergence order of `errors` against `step_sizes`.
pub fn convergence_order(step_sizes: &[f64], errors: &[f64]) -> Result<OrderReport> {
    if step_sizes.len() != errors.len() || step_sizes.len() < 2 {
        return Err(Error::DimensionMismatch { expected: step_sizes.len().max(2), found: errors.len() });
    }
    if step_sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::StepRejected("step sizes must be strictly decreasing".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::NonFiniteValue("convergence errors must be positive".into()));
    }
    let pts: Vec<(usize, f64, f64)> =
        step_sizes.iter().zip(errors).enumerate().map(|(i, (h, e))| (i, h.ln(), e.ln())).collect();
    let (slope, _) = least_squares_slope(&pts);
    Ok(OrderReport { step_sizes: step_sizes.to_vec(), errors: errors.to_vec(), slope })
}

/// Evaluate `error_at(h)` for every step size on its own thread and fit the
/// order.
pub fn order_study<F>(step_sizes: &[f64], error_at: F) -> Result<OrderReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let errors: Vec<Result<f64>> = std::thread::scope(|scope| {
        let error_at = &error_at;
        let handles: Vec<_> = step_sizes.iter().map(|&h| scope.spawn(move || error_at(h))).collect();
        handles.into_iter().map(|hd| hd.join().expect("order study worker panicked")).collect()
    });
    let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;
    convergence_order(step_sizes, &errors)
}
