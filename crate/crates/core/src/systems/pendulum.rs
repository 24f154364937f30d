//! The double spherical pendulum hanging below a fixed pivot.
//!
//! Bob 1 (mass `m1`) hangs on a rod of length `l1` from the pivot; bob 2
//! (mass `m2`) hangs on a rod of length `l2` from bob 1. Each rod direction is
//! written in cylindrical coordinates `(r_i, θ_i)` with the vertical drop
//! `σ_i = √(l_i² − r_i²)` eliminated, so the configuration is
//! `q = (r1, θ1, r2, θ2)` on the chart `0 < r_i < l_i`.
//!
//! Rotation about the vertical axis shifts both angles. The trivialization
//! used for reduction takes `g = θ1` and shape coordinates
//! `x = (r1, r2, φ)` with `φ = θ2 − θ1`; all shape-space matrices below are
//! ordered `(r1, r2, φ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::newton::lu_solve;
use crate::system::{MechanicalSystem, ReducedSystem};

/// Relative margin kept between `r_i` and the chart boundary.
pub const CHART_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DspParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl Default for DspParams {
    fn default() -> Self {
        Self { m1: 1.0, m2: 1.0, l1: 1.0, l2: 1.0, g: 9.8 }
    }
}

impl DspParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("l1", self.l1), ("l2", self.l2), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::SingularConfiguration(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleSphericalPendulum {
    pub params: DspParams,
}

/// Quantities shared by the Lagrangian and its derivatives.
struct Kin {
    r1: f64,
    r2: f64,
    s1: f64,
    s2: f64,
    c: f64,
    s: f64,
}

impl DoubleSphericalPendulum {
    pub fn new(params: DspParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    fn check_radii(&self, r1: f64, r2: f64) -> Result<()> {
        let p = &self.params;
        let ok = |r: f64, l: f64| r.is_finite() && r > CHART_MARGIN * l && r < l - CHART_MARGIN * l;
        if ok(r1, p.l1) && ok(r2, p.l2) {
            Ok(())
        } else {
            Err(Error::SingularConfiguration(format!(
                "pendulum chart requires 0 < r_i < l_i, got r1 = {r1}, r2 = {r2}"
            )))
        }
    }

    fn kin(&self, r1: f64, r2: f64, phi: f64) -> Result<Kin> {
        self.check_radii(r1, r2)?;
        let p = &self.params;
        Ok(Kin {
            r1,
            r2,
            s1: (p.l1 * p.l1 - r1 * r1).sqrt(),
            s2: (p.l2 * p.l2 - r2 * r2).sqrt(),
            c: phi.cos(),
            s: phi.sin(),
        })
    }

    /// Potential energy `V = −(m1+m2) g σ1 − m2 g σ2`.
    pub fn potential(&self, r1: f64, r2: f64) -> Result<f64> {
        self.check_radii(r1, r2)?;
        let p = &self.params;
        let s1 = (p.l1 * p.l1 - r1 * r1).sqrt();
        let s2 = (p.l2 * p.l2 - r2 * r2).sqrt();
        Ok(-(p.m1 + p.m2) * p.g * s1 - p.m2 * p.g * s2)
    }

    /// Kinetic energy.
    pub fn kinetic(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        let (m1, m2) = (self.params.m1, self.params.m2);
        let (rd1, td1, rd2, td2) = (qdot[0], qdot[1], qdot[2], qdot[3]);
        let w1 = k.r1 * rd1 / k.s1;
        let w2 = k.r2 * rd2 / k.s2;
        Ok(0.5 * (m1 + m2) * (rd1 * rd1 + k.r1 * k.r1 * td1 * td1)
            + 0.5 * m2 * (rd2 * rd2 + k.r2 * k.r2 * td2 * td2)
            + m2 * ((rd1 * rd2 + k.r1 * k.r2 * td1 * td2) * k.c + (k.r1 * rd2 * td1 - k.r2 * rd1 * td2) * k.s)
            + 0.5 * (m1 + m2) * w1 * w1
            + m2 * w1 * w2
            + 0.5 * m2 * w2 * w2)
    }

    /// Kinetic metric on the ambient cylindrical velocities
    /// `(ṙ1, θ̇1, ż1, ṙ2, θ̇2, ż2)`, where `(ṙ2, θ̇2, ż2)` describe bob 2
    /// relative to bob 1.
    pub fn kinetic_metric(&self, r1: f64, r2: f64, phi: f64) -> DMatrix<f64> {
        let p = &self.params;
        let (m1, m2) = (p.m1, p.m2);
        let (c, s) = (phi.cos(), phi.sin());
        let mut g = DMatrix::zeros(6, 6);
        g[(0, 0)] = m1 + m2;
        g[(1, 1)] = (m1 + m2) * r1 * r1;
        g[(2, 2)] = m1 + m2;
        g[(3, 3)] = m2;
        g[(4, 4)] = m2 * r2 * r2;
        g[(5, 5)] = m2;
        let mut sym = |i: usize, j: usize, v: f64| {
            g[(i, j)] = v;
            g[(j, i)] = v;
        };
        sym(0, 3, m2 * c);
        sym(0, 4, -m2 * r2 * s);
        sym(1, 3, m2 * r1 * s);
        sym(1, 4, m2 * r1 * r2 * c);
        sym(2, 5, m2);
        g
    }

    /// Ambient velocity `(ṙ1, θ̇1, ż1, ṙ2, θ̇2, ż2)` of a chart velocity, with
    /// `ż_i = −r_i ṙ_i / σ_i`.
    pub fn ambient_velocity(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        Ok(DVector::from_vec(vec![
            qdot[0],
            qdot[1],
            -k.r1 * qdot[0] / k.s1,
            qdot[2],
            qdot[3],
            -k.r2 * qdot[2] / k.s2,
        ]))
    }

    /// Locked inertia `𝕀 = m1 r1² + m2 (r1² + r2² + 2 r1 r2 cos φ)`.
    pub fn locked_inertia_value(&self, r1: f64, r2: f64, phi: f64) -> f64 {
        let p = &self.params;
        p.m1 * r1 * r1 + p.m2 * (r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * phi.cos())
    }

    /// `(∂𝕀/∂r1, ∂𝕀/∂r2, ∂𝕀/∂φ)`.
    pub fn locked_inertia_gradient(&self, r1: f64, r2: f64, phi: f64) -> DVector<f64> {
        let p = &self.params;
        let (c, s) = (phi.cos(), phi.sin());
        DVector::from_vec(vec![
            2.0 * p.m1 * r1 + 2.0 * p.m2 * (r1 + r2 * c),
            2.0 * p.m2 * (r2 + r1 * c),
            -2.0 * p.m2 * r1 * r2 * s,
        ])
    }

    /// Mechanical connection as a one-form on `(r1, θ1, r2, θ2)`.
    pub fn connection_form(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        let m1 = self.params.m1;
        let m2 = self.params.m2;
        let inertia = self.locked_inertia_value(k.r1, k.r2, q[3] - q[1]);
        Ok(DVector::from_vec(vec![
            -m2 * k.r2 * k.s,
            (m1 + m2) * k.r1 * k.r1 + m2 * k.r1 * k.r2 * k.c,
            m2 * k.r1 * k.s,
            m2 * k.r2 * k.r2 + m2 * k.r1 * k.r2 * k.c,
        ]) / inertia)
    }
}

impl MechanicalSystem for DoubleSphericalPendulum {
    fn dim(&self) -> usize {
        4
    }

    fn lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(self.kinetic(q, qdot)? - self.potential(q[0], q[2])?)
    }

    fn dl_dq(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        let p = &self.params;
        let (m1, m2, g) = (p.m1, p.m2, p.g);
        let (rd1, td1, rd2, td2) = (qdot[0], qdot[1], qdot[2], qdot[3]);
        let w1 = k.r1 * rd1 / k.s1;
        let w2 = k.r2 * rd2 / k.s2;
        let dw1 = rd1 * p.l1 * p.l1 / (k.s1 * k.s1 * k.s1);
        let dw2 = rd2 * p.l2 * p.l2 / (k.s2 * k.s2 * k.s2);

        let dt_dr1 = (m1 + m2) * k.r1 * td1 * td1
            + m2 * (k.r2 * td1 * td2 * k.c + rd2 * td1 * k.s)
            + ((m1 + m2) * w1 + m2 * w2) * dw1;
        let dt_dr2 =
            m2 * k.r2 * td2 * td2 + m2 * (k.r1 * td1 * td2 * k.c - rd1 * td2 * k.s) + (m2 * w1 + m2 * w2) * dw2;
        let dt_dphi = m2
            * (-(rd1 * rd2 + k.r1 * k.r2 * td1 * td2) * k.s + (k.r1 * rd2 * td1 - k.r2 * rd1 * td2) * k.c);
        let dv_dr1 = (m1 + m2) * g * k.r1 / k.s1;
        let dv_dr2 = m2 * g * k.r2 / k.s2;
        Ok(DVector::from_vec(vec![dt_dr1 - dv_dr1, -dt_dphi, dt_dr2 - dv_dr2, dt_dphi]))
    }

    fn dl_dqdot(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        let (m1, m2) = (self.params.m1, self.params.m2);
        let (rd1, td1, rd2, td2) = (qdot[0], qdot[1], qdot[2], qdot[3]);
        let w1 = k.r1 * rd1 / k.s1;
        let w2 = k.r2 * rd2 / k.s2;
        Ok(DVector::from_vec(vec![
            (m1 + m2) * rd1 + m2 * (rd2 * k.c - k.r2 * td2 * k.s) + ((m1 + m2) * w1 + m2 * w2) * k.r1 / k.s1,
            (m1 + m2) * k.r1 * k.r1 * td1 + m2 * (k.r1 * k.r2 * td2 * k.c + k.r1 * rd2 * k.s),
            m2 * rd2 + m2 * (rd1 * k.c + k.r1 * td1 * k.s) + (m2 * w1 + m2 * w2) * k.r2 / k.s2,
            m2 * k.r2 * k.r2 * td2 + m2 * (k.r1 * k.r2 * td1 * k.c - k.r2 * rd1 * k.s),
        ]))
    }

    fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let k = self.kin(q[0], q[2], q[3] - q[1])?;
        let (m1, m2) = (self.params.m1, self.params.m2);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = (m1 + m2) * (1.0 + k.r1 * k.r1 / (k.s1 * k.s1));
        m[(1, 1)] = (m1 + m2) * k.r1 * k.r1;
        m[(2, 2)] = m2 * (1.0 + k.r2 * k.r2 / (k.s2 * k.s2));
        m[(3, 3)] = m2 * k.r2 * k.r2;
        let mut sym = |i: usize, j: usize, v: f64| {
            m[(i, j)] = v;
            m[(j, i)] = v;
        };
        sym(0, 2, m2 * k.c + m2 * k.r1 * k.r2 / (k.s1 * k.s2));
        sym(0, 3, -m2 * k.r2 * k.s);
        sym(1, 2, m2 * k.r1 * k.s);
        sym(1, 3, m2 * k.r1 * k.r2 * k.c);
        Ok(m)
    }

    fn shape_basis(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    }

    fn group_basis(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 1.0])
    }

    fn shape_projection(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0])
    }

    fn group_projection(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, 0.0])
    }

    fn shape_angle_mask(&self) -> Vec<bool> {
        vec![false, false, true]
    }

    fn check_chart(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: q.len() });
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteValue("pendulum configuration".into()));
        }
        self.check_radii(q[0], q[2])
    }
}

/// Shape-space reduction of the [`DoubleSphericalPendulum`] at momentum `μ`.
///
/// Locked inertia, connection, magnetic term and amended potential are
/// closed-form. The reduced Routhian is `½‖hor(v)‖² − V_μ`, evaluated with
/// the kinetic metric on the horizontal part of the level-set velocity. Its
/// derivatives follow from `R̂^μ(x, ẋ) = L(q, q̇*) − μ 𝕀⁻¹ μ`, where `q̇*`
/// is the unique lift of `ẋ` with momentum `μ`:
///
/// ```text
/// ∂R̂/∂ẋ = Txᵀ ∂L/∂q̇ − Aᵀμ
/// ∂R̂/∂x = Txᵀ ∂L/∂q − μ (∂A/∂x)ᵀ ẋ
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DspReduced {
    pub system: DoubleSphericalPendulum,
    mu: DVector<f64>,
}

impl DspReduced {
    pub fn new(system: DoubleSphericalPendulum, mu: f64) -> Self {
        Self { system, mu: DVector::from_element(1, mu) }
    }

    fn mu_value(&self) -> f64 {
        self.mu[0]
    }

    /// The configuration with group coordinate zero over `x`.
    fn base_point(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0], 0.0, x[1], x[2]])
    }

    /// Level-set velocity `q̇*` over `(x, ẋ)`.
    pub fn level_set_velocity(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let gdot = self.group_velocity(x, xdot)?[0];
        Ok(DVector::from_vec(vec![xdot[0], gdot, xdot[1], gdot + xdot[2]]))
    }

    /// Horizontal part of the level-set velocity in ambient coordinates.
    pub fn horizontal_velocity(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.connection_a(x)?;
        let vert = (a * xdot)[0];
        let q = self.base_point(x);
        let hor = DVector::from_vec(vec![xdot[0], -vert, xdot[1], xdot[2] - vert]);
        self.system.ambient_velocity(&q, &hor)
    }

    /// The numerator `N` of `A = (m2/𝕀) N` and its Jacobian
    /// `[i][j] = ∂N_i/∂x_j`.
    fn connection_numerator(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (r1, r2, phi) = (x[0], x[1], x[2]);
        let (c, s) = (phi.cos(), phi.sin());
        let n = DVector::from_vec(vec![-r2 * s, r1 * s, r2 * r2 + r1 * r2 * c]);
        #[rustfmt::skip]
        let dn = DMatrix::from_row_slice(3, 3, &[
            0.0,    -s,                  -r2 * c,
            s,      0.0,                 r1 * c,
            r2 * c, 2.0 * r2 + r1 * c,   -r1 * r2 * s,
        ]);
        (n, dn)
    }

    /// Coefficient `c = 2 μ m1 m2 r1 r2 / 𝕀²` of `β_μ = c · dφ∧(r2 dr1 − r1 dr2)`.
    pub fn magnetic_coefficient(&self, r1: f64, r2: f64, phi: f64) -> f64 {
        let p = &self.system.params;
        let inertia = self.system.locked_inertia_value(r1, r2, phi);
        2.0 * self.mu_value() * p.m1 * p.m2 * r1 * r2 / (inertia * inertia)
    }

    /// Gradient of the amended potential in `(r1, r2, φ)`.
    pub fn amended_potential_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_shape(x)?;
        let p = &self.system.params;
        let mu = self.mu_value();
        let (r1, r2, phi) = (x[0], x[1], x[2]);
        let s1 = (p.l1 * p.l1 - r1 * r1).sqrt();
        let s2 = (p.l2 * p.l2 - r2 * r2).sqrt();
        let inertia = self.system.locked_inertia_value(r1, r2, phi);
        let di = self.system.locked_inertia_gradient(r1, r2, phi);
        let gravity = DVector::from_vec(vec![(p.m1 + p.m2) * p.g * r1 / s1, p.m2 * p.g * r2 / s2, 0.0]);
        Ok(gravity - di * (0.5 * mu * mu / (inertia * inertia)))
    }
}

impl ReducedSystem for DspReduced {
    fn shape_dim(&self) -> usize {
        3
    }

    fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    fn routhian_hat(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        let hor = self.horizontal_velocity(x, xdot)?;
        let g = self.system.kinetic_metric(x[0], x[1], x[2]);
        Ok(0.5 * hor.dot(&(g * &hor)) - self.amended_potential(x)?)
    }

    fn d_routhian_dx(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.base_point(x);
        let qdot = self.level_set_velocity(x, xdot)?;
        let lq = self.system.dl_dq(&q, &qdot)?;
        let da = &self.connection_da(x)?[0];
        let tx = self.system.shape_basis();
        Ok(tx.transpose() * lq - da.transpose() * xdot * self.mu_value())
    }

    fn d_routhian_dxdot(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.base_point(x);
        let qdot = self.level_set_velocity(x, xdot)?;
        let lv = self.system.dl_dqdot(&q, &qdot)?;
        let a = self.connection_a(x)?;
        let tx = self.system.shape_basis();
        Ok(tx.transpose() * lv - a.transpose() * &self.mu)
    }

    fn connection_a(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(x)?;
        let inertia = self.system.locked_inertia_value(x[0], x[1], x[2]);
        let (n, _) = self.connection_numerator(x);
        Ok(DMatrix::from_row_slice(1, 3, (n * (self.system.params.m2 / inertia)).as_slice()))
    }

    fn connection_da(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_shape(x)?;
        let m2 = self.system.params.m2;
        let inertia = self.system.locked_inertia_value(x[0], x[1], x[2]);
        let di = self.system.locked_inertia_gradient(x[0], x[1], x[2]);
        let (n, dn) = self.connection_numerator(x);
        let da = (dn * inertia - n * di.transpose()) * (m2 / (inertia * inertia));
        Ok(vec![da])
    }

    fn beta_mu(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(x)?;
        let (r1, r2) = (x[0], x[1]);
        let coeff = self.magnetic_coefficient(r1, r2, x[2]);
        let mut b = DMatrix::zeros(3, 3);
        b[(2, 0)] = coeff * r2;
        b[(0, 2)] = -coeff * r2;
        b[(2, 1)] = -coeff * r1;
        b[(1, 2)] = coeff * r1;
        Ok(b)
    }

    fn amended_potential(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_shape(x)?;
        let mu = self.mu_value();
        let inertia = self.system.locked_inertia_value(x[0], x[1], x[2]);
        Ok(self.system.potential(x[0], x[1])? + 0.5 * mu * mu / inertia)
    }

    fn locked_inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(x)?;
        Ok(DMatrix::from_element(1, 1, self.system.locked_inertia_value(x[0], x[1], x[2])))
    }

    fn reduced_energy(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64> {
        let hor = self.horizontal_velocity(x, xdot)?;
        let g = self.system.kinetic_metric(x[0], x[1], x[2]);
        Ok(0.5 * hor.dot(&(g * &hor)) + self.amended_potential(x)?)
    }

    fn check_shape(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: x.len() });
        }
        if !x[2].is_finite() {
            return Err(Error::NonFiniteValue("pendulum relative angle".into()));
        }
        self.system.check_radii(x[0], x[1])
    }

    fn angle_mask(&self) -> Vec<bool> {
        vec![false, false, true]
    }

    fn group_velocity(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let inertia = self.system.locked_inertia_value(x[0], x[1], x[2]);
        let a = self.connection_a(x)?;
        Ok(DVector::from_element(1, self.mu_value() / inertia - (a * xdot)[0]))
    }

    fn velocity_from_momentum(&self, x: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
        // With the horizontal lift H = Tx − Tg A, the reduced momentum is
        // s = Hᵀ M H ẋ: the vertical terms cancel because A = 𝕀⁻¹ Tgᵀ M Tx.
        let q = self.base_point(x);
        let mass = self.system.mass_matrix(&q)?;
        let lift = self.system.shape_basis() - self.system.group_basis() * self.connection_a(x)?;
        let k = lift.transpose() * mass * &lift;
        lu_solve(&k, s)
    }
}
