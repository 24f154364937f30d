//! A satellite about an oblate planet (the J2 problem) in cylindrical
//! coordinates `q = (r, θ, z)`.
//!
//! Units are chosen so that the planet radius is 1 and the period of a
//! circular orbit at zero altitude is `2π` when `J2 = 0`. The potential is
//!
//! ```text
//! V(r, z) = −[ 1/ρ + (J2/ρ³)(3z²/(2ρ²) − 1/2) ],   ρ = √(r² + z²)
//! ```
//!
//! and rotation about the polar axis, `θ ↦ θ + φ`, is the symmetry.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{MechanicalSystem, ReducedSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteJ2 {
    pub j2: f64,
}

impl SatelliteJ2 {
    pub fn new(j2: f64) -> Result<Self> {
        if !(j2 >= 0.0 && j2.is_finite()) {
            return Err(Error::SingularConfiguration(format!("J2 must be a non-negative number, got {j2}")));
        }
        Ok(Self { j2 })
    }

    /// Potential energy `V(r, z)`.
    pub fn potential(&self, r: f64, z: f64) -> Result<f64> {
        let rho2 = r * r + z * z;
        if rho2 <= 0.0 || !rho2.is_finite() {
            return Err(Error::SingularConfiguration("satellite at the origin".into()));
        }
        let rho = rho2.sqrt();
        let rho3 = rho2 * rho;
        Ok(-(1.0 / rho + self.j2 / rho3 * (1.5 * z * z / rho2 - 0.5)))
    }

    /// `(∂V/∂r, ∂V/∂z)`.
    pub fn potential_gradient(&self, r: f64, z: f64) -> Result<(f64, f64)> {
        let rho2 = r * r + z * z;
        if rho2 <= 0.0 || !rho2.is_finite() {
            return Err(Error::SingularConfiguration("satellite at the origin".into()));
        }
        let rho = rho2.sqrt();
        let rho3 = rho2 * rho;
        let rho5 = rho3 * rho2;
        let rho7 = rho5 * rho2;
        let j2 = self.j2;
        let du_dr = -r / rho3 + j2 * (-7.5 * r * z * z / rho7 + 1.5 * r / rho5);
        let du_dz = -z / rho3 + j2 * (4.5 * z / rho5 - 7.5 * z * z * z / rho7);
        Ok((-du_dr, -du_dz))
    }

    /// Angular speed of the equatorial circular orbit of radius `r`.
    pub fn circular_speed(&self, r: f64) -> Result<f64> {
        let (dv_dr, _) = self.potential_gradient(r, 0.0)?;
        Ok((dv_dr / r).sqrt())
    }
}

impl MechanicalSystem for SatelliteJ2 {
    fn dim(&self) -> usize {
        3
    }

    fn lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        let (r, z) = (q[0], q[2]);
        let kinetic = 0.5 * (qdot[0] * qdot[0] + r * r * qdot[1] * qdot[1] + qdot[2] * qdot[2]);
        Ok(kinetic - self.potential(r, z)?)
    }

    fn dl_dq(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let (dv_dr, dv_dz) = self.potential_gradient(q[0], q[2])?;
        Ok(DVector::from_vec(vec![q[0] * qdot[1] * qdot[1] - dv_dr, 0.0, -dv_dz]))
    }

    fn dl_dqdot(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![qdot[0], q[0] * q[0] * qdot[1], qdot[2]]))
    }

    fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, q[0] * q[0], 1.0])))
    }

    fn velocity_from_momentum(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_chart(q)?;
        Ok(DVector::from_vec(vec![p[0], p[1] / (q[0] * q[0]), p[2]]))
    }

    fn shape_basis(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    fn group_basis(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])
    }

    fn shape_projection(&self) -> DMatrix<f64> {
        self.shape_basis().transpose()
    }

    fn group_projection(&self) -> DMatrix<f64> {
        self.group_basis().transpose()
    }

    fn check_chart(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: q.len() });
        }
        if !(q[0] > 0.0) || !q.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularConfiguration(format!("cylindrical chart requires r > 0, got r = {}", q[0])));
        }
        Ok(())
    }
}

/// Shape-space reduction of [`SatelliteJ2`] at momentum `μ`, with shape
/// coordinates `x = (r, z)`.
///
/// The connection is `𝔄_μ = μ dθ`, so `A ≡ 0` and `β_μ ≡ 0`. The reduced
/// Routhian is
///
/// ```text
/// R̂^μ = ½(ṙ² + ż²) − V_μ(r, z) − ½μ²,   V_μ = V + μ²/(2r²)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteReduced {
    pub system: SatelliteJ2,
    mu: DVector<f64>,
}

impl SatelliteReduced {
    pub fn new(system: SatelliteJ2, mu: f64) -> Self {
        Self { system, mu: DVector::from_element(1, mu) }
    }

    fn mu_value(&self) -> f64 {
        self.mu[0]
    }
}

impl ReducedSystem for SatelliteReduced {
    fn shape_dim(&self) -> usize {
        2
    }

    fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    fn routhian_hat(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        let mu = self.mu_value();
        Ok(0.5 * xdot.norm_squared() - self.amended_potential(x)? - 0.5 * mu * mu)
    }

    fn d_routhian_dx(&self, x: &DVector<f64>, _xdot: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_shape(x)?;
        let mu = self.mu_value();
        let (dv_dr, dv_dz) = self.system.potential_gradient(x[0], x[1])?;
        Ok(DVector::from_vec(vec![-dv_dr + mu * mu / (x[0] * x[0] * x[0]), -dv_dz]))
    }

    fn d_routhian_dxdot(&self, _x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(xdot.clone())
    }

    fn connection_a(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(1, 2))
    }

    fn connection_da(&self, _x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        Ok(vec![DMatrix::zeros(2, 2)])
    }

    fn beta_mu(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(2, 2))
    }

    fn amended_potential(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_shape(x)?;
        let mu = self.mu_value();
        Ok(self.system.potential(x[0], x[1])? + mu * mu / (2.0 * x[0] * x[0]))
    }

    fn locked_inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(x)?;
        Ok(DMatrix::from_element(1, 1, x[0] * x[0]))
    }

    fn reduced_energy(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * xdot.norm_squared() + self.amended_potential(x)?)
    }

    fn check_shape(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: x.len() });
        }
        if !(x[0] > 0.0) || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularConfiguration(format!("cylindrical chart requires r > 0, got r = {}", x[0])));
        }
        Ok(())
    }

    fn velocity_from_momentum(&self, _x: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(s.clone())
    }
}
