//! Continuous mechanical systems with an abelian symmetry, and their
//! shape-space reductions.
//!
//! Every system fixes a local trivialization in which the group acts by
//! addition: a configuration is written `q = Tx·x + Tg·g` for constant
//! matrices `Tx` (n×d) and `Tg` (n×m), with shape coordinates `x` and group
//! coordinates `g`. The infinitesimal generator of the action is then the
//! constant matrix `Tg`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::newton::lu_solve;

/// A point of the configuration manifold in a named chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    pub coords: DVector<f64>,
    pub chart_id: u8,
}

impl ConfigPoint {
    pub fn new(coords: DVector<f64>) -> Self {
        Self { coords, chart_id: 0 }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(values))
    }
}

/// A point of shape space.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePoint {
    pub coords: DVector<f64>,
}

impl ShapePoint {
    pub fn new(coords: DVector<f64>) -> Self {
        Self { coords }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(values))
    }
}

/// Additive coordinates of an element of an abelian group (torus factors in
/// radians).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub value: DVector<f64>,
}

impl GroupElement {
    pub fn new(value: DVector<f64>) -> Self {
        Self { value }
    }

    /// Representative with every component in (−π, π].
    pub fn normalized(&self) -> Self {
        Self { value: self.value.map(wrap_angle) }
    }
}

/// A value of the momentum map.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    pub mu: DVector<f64>,
}

impl Momentum {
    pub fn new(mu: DVector<f64>) -> Self {
        Self { mu }
    }

    pub fn scalar(mu: f64) -> Self {
        Self { mu: DVector::from_element(1, mu) }
    }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Reject non-finite coordinates.
pub fn ensure_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue(what.to_string()))
    }
}

/// A Lagrangian system `L: TQ → ℝ` invariant under translation of its group
/// coordinates.
pub trait MechanicalSystem: Send + Sync {
    /// Configuration dimension `n`.
    fn dim(&self) -> usize;

    /// Group dimension `m`.
    fn group_dim(&self) -> usize {
        1
    }

    fn shape_dim(&self) -> usize {
        self.dim() - self.group_dim()
    }

    fn lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64>;

    fn dl_dq(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>>;

    fn dl_dqdot(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>>;

    /// Velocity Hessian `∂²L/∂q̇²`.
    fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Shape embedding `Tx` (n×d).
    fn shape_basis(&self) -> DMatrix<f64>;

    /// Group embedding `Tg` (n×m); its columns are the infinitesimal
    /// generators of the unit Lie algebra directions.
    fn group_basis(&self) -> DMatrix<f64>;

    /// Left inverse of the trivialization onto shape coordinates (d×n).
    fn shape_projection(&self) -> DMatrix<f64>;

    /// Left inverse of the trivialization onto group coordinates (m×n).
    fn group_projection(&self) -> DMatrix<f64>;

    /// Which shape coordinates are angles (wrapped when reported).
    fn shape_angle_mask(&self) -> Vec<bool> {
        vec![false; self.shape_dim()]
    }

    /// Fail with [`Error::SingularConfiguration`] outside the chart.
    fn check_chart(&self, q: &DVector<f64>) -> Result<()>;

    /// Configuration indices touched by the group action.
    fn group_indices(&self) -> Vec<usize> {
        let tg = self.group_basis();
        (0..tg.nrows()).filter(|&i| tg.row(i).iter().any(|v| *v != 0.0)).collect()
    }

    fn shape_of(&self, q: &DVector<f64>) -> DVector<f64> {
        self.shape_projection() * q
    }

    fn group_of(&self, q: &DVector<f64>) -> DVector<f64> {
        self.group_projection() * q
    }

    fn lift(&self, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        self.shape_basis() * x + self.group_basis() * g
    }

    /// Continuous momentum map `J_L = Tgᵀ ∂L/∂q̇`.
    fn momentum_map(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.group_basis().transpose() * self.dl_dqdot(q, qdot)?)
    }

    /// Energy `q̇·∂L/∂q̇ − L`.
    fn energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(qdot.dot(&self.dl_dqdot(q, qdot)?) - self.lagrangian(q, qdot)?)
    }

    /// Inverse Legendre transform. The default assumes `L` is quadratic in
    /// the velocities with no linear part, so `q̇ = M(q)⁻¹ p`.
    fn velocity_from_momentum(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        lu_solve(&self.mass_matrix(q)?, p)
    }
}

/// The reduced (Routh) system on shape space at a fixed momentum value.
pub trait ReducedSystem: Send + Sync {
    fn shape_dim(&self) -> usize;

    /// The momentum value `μ` this reduction is taken at.
    fn mu(&self) -> &DVector<f64>;

    /// Reduced Routhian `R̂^μ(x, ẋ)`.
    fn routhian_hat(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64>;

    fn d_routhian_dx(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>>;

    fn d_routhian_dxdot(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>>;

    /// Local connection `A(x)` (m×d): `𝔄(g, x)(ġ, ẋ) = A(x)ẋ + ġ`.
    fn connection_a(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Jacobian of `A`: one d×d matrix per group component `k`, with entry
    /// `[i][j] = ∂A_{k,i}/∂x_j`.
    fn connection_da(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>>;

    /// Magnetic two-form as an antisymmetric matrix,
    /// `β(u, v) = uᵀ B v` with `B_ij = Σ_k μ_k (∂_i A_{k,j} − ∂_j A_{k,i})`.
    fn beta_mu(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Amended potential `V_μ = V + ½ μ·𝕀⁻¹μ`.
    fn amended_potential(&self, x: &DVector<f64>) -> Result<f64>;

    /// Locked inertia tensor (m×m).
    fn locked_inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Energy of the reduced motion; equals the unreduced energy on the
    /// momentum level set.
    fn reduced_energy(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<f64>;

    fn check_shape(&self, x: &DVector<f64>) -> Result<()>;

    /// Which shape coordinates are angles.
    fn angle_mask(&self) -> Vec<bool> {
        vec![false; self.shape_dim()]
    }

    /// Group velocity on the level set: `ġ = 𝕀⁻¹μ − A(x)ẋ`.
    fn group_velocity(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DVector<f64>> {
        let inertia = self.locked_inertia(x)?;
        Ok(lu_solve(&inertia, self.mu())? - self.connection_a(x)? * xdot)
    }

    /// Reduced Legendre inversion `s ↦ ẋ`. `∂R̂/∂ẋ` is affine in `ẋ`, so the
    /// velocity Hessian is assembled column by column.
    fn velocity_from_momentum(&self, x: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.shape_dim();
        let zero = DVector::zeros(d);
        let offset = self.d_routhian_dxdot(x, &zero)?;
        let mut hess = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = zero.clone();
            e[j] = 1.0;
            let col = self.d_routhian_dxdot(x, &e)? - &offset;
            hess.set_column(j, &col);
        }
        lu_solve(&hess, &(s - offset))
    }
}

/// `β` assembled from a connection Jacobian, for implementors.
pub fn curvature_from_da(mu: &DVector<f64>, da: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = da.first().map_or(0, |m| m.nrows());
    let mut b = DMatrix::zeros(d, d);
    for (k, dak) in da.iter().enumerate() {
        // dak[(j, i)] = ∂A_j/∂x_i.
        b += (dak.transpose() - dak) * mu[k];
    }
    b
}
