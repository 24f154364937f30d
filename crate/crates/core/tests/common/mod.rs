#![allow(dead_code)]

use discrete_routh::newton::{newton_solve, NewtonOptions};
use discrete_routh::systems::{DoubleSphericalPendulum, DspParams, DspReduced, SatelliteJ2};
use discrete_routh::{MechanicalSystem, ReducedSystem};
use nalgebra::DVector;

pub fn v(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

/// Inclination of the inclined circular orbit.
pub const INCLINATION: f64 = 0.2;

/// Unit circular orbit inclined by [`INCLINATION`]: `(q0, q̇0)` with
/// `q = (r, θ, z)`.
pub fn inclined_circular() -> (DVector<f64>, DVector<f64>) {
    (v(&[1.0, 0.0, 0.0]), v(&[0.0, INCLINATION.cos(), INCLINATION.sin()]))
}

pub fn satellite(j2: f64) -> SatelliteJ2 {
    SatelliteJ2::new(j2).unwrap()
}

pub fn dsp() -> DoubleSphericalPendulum {
    DoubleSphericalPendulum::new(DspParams::default()).unwrap()
}

/// Momentum of the pendulum test motion.
pub const DSP_MU: f64 = 3.0;

/// Relative equilibrium of the pendulum at momentum `mu` with `φ = 0`: the
/// critical point of the amended potential.
pub fn dsp_relative_equilibrium(mu: f64) -> DVector<f64> {
    let red = DspReduced::new(dsp(), mu);
    let grad = |y: &DVector<f64>| red.amended_potential_gradient(&v(&[y[0], y[1], 0.0])).map(|g| v(&[g[0], g[1]]));
    let sol = newton_solve(grad, &v(&[0.5, 0.5]), &NewtonOptions::default()).unwrap();
    v(&[sol.x[0], sol.x[1], 0.0])
}

/// A regular pendulum motion near the relative equilibrium: shape point and
/// shape velocity.
pub fn dsp_shape_initial() -> (DVector<f64>, DVector<f64>) {
    let x = dsp_relative_equilibrium(DSP_MU) + v(&[0.03, -0.02, 0.1]);
    (x, v(&[0.05, -0.1, 0.2]))
}

/// The same motion as an unreduced velocity state `(q0, q̇0)` with momentum
/// [`DSP_MU`] and `θ1 = 0`.
pub fn dsp_initial() -> (DVector<f64>, DVector<f64>) {
    let (x, xdot) = dsp_shape_initial();
    let red = DspReduced::new(dsp(), DSP_MU);
    let q = dsp().lift(&x, &v(&[0.0]));
    (q, red.level_set_velocity(&x, &xdot).unwrap())
}

/// Sup-norm distance over a pair of trajectories of equal length.
pub fn max_distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

pub fn reduced_mu(reduced: &dyn ReducedSystem) -> f64 {
    reduced.mu()[0]
}
