//! Discrete Routh reduction: the reduced discrete Lagrangian `L̂_d`, the
//! connection one-form `Â`, the discrete Routh (DR) equations, the reduced
//! discrete Legendre transform, the reduced SPRK scheme (RSPRK), projection
//! and reconstruction.
//!
//! Everything is expressed in the additive trivialization
//! `q = Tx·x + Tg·g` of the underlying [`MechanicalSystem`]. For a pair of
//! shape points `(x0, x1)` and momentum `μ`, the group displacement `Δg` is
//! the solution of
//!
//! ```text
//! J_d(lift(x0, 0), lift(x1, Δg)) = μ
//! ```
//!
//! and `L̂_d(x0, x1) = L_d(lift(x0, g), lift(x1, g + Δg))` for any `g`.
//!
//! Two splittings of `DL̂_d − Â` are available. The exact partials
//! [`ReducedDiscreteLagrangian::d1`]/[`d2`](ReducedDiscreteLagrangian::d2)
//! include the dependence of `Δg` on the shape points, and pair with the
//! exact one-form [`ConnectionOneForm::a1`]/[`a2`](ConnectionOneForm::a2).
//! The group-fixed partials [`ReducedDiscreteLagrangian::routhian_d1`]/
//! [`routhian_d2`](ReducedDiscreteLagrangian::routhian_d2) pair with the
//! local-connection terms `Â₁ = −μA(x0)`, `Â₂ = μA(x1)`. The `Δg` terms
//! cancel in the difference, so both give the same DR equations and reduced
//! Legendre transform.

use nalgebra::{DMatrix, DVector};

use crate::discrete::{discrete_momentum, DiscreteLagrangian};
use crate::error::{Error, Result};
use crate::fd::{fd_jacobian, DEFAULT_FD_SCALE};
use crate::newton::{lu_solve, newton_solve, NewtonOptions};
use crate::sprk::{split_stages, stack_stages, ButcherTableau, CotangentState};
use crate::system::{ensure_finite, wrap_angle, MechanicalSystem, ReducedSystem};
use crate::trajectory::{integrate, Trajectory};

/// Tolerance on the momentum of reconstruction seeds.
pub const SEED_MOMENTUM_TOL: f64 = 1e-8;

fn as_rejection(err: Error) -> Error {
    match err {
        Error::SingularConfiguration(m) => Error::StepRejected(m),
        other => other,
    }
}

/// `μ·A(x)` as a shape covector, `Aᵀμ`.
fn mu_a(reduced: &dyn ReducedSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(reduced.connection_a(x)?.transpose() * reduced.mu())
}

/// `Σ_k μ_k (∂A_k/∂x) v`.
fn mu_da_v(reduced: &dyn ReducedSystem, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let mu = reduced.mu();
    let mut out = DVector::zeros(v.len());
    for (k, dak) in reduced.connection_da(x)?.iter().enumerate() {
        out += dak * v * mu[k];
    }
    Ok(out)
}

/// The discrete Lagrangian dropped to `S × S` on the level set `J_d = μ`.
#[derive(Clone)]
pub struct ReducedDiscreteLagrangian<'a> {
    ld: &'a dyn DiscreteLagrangian,
    mu: DVector<f64>,
}

/// Build `L̂_d` from `L_d` at momentum `μ`.
pub fn reduce_lagrangian<'a>(ld: &'a dyn DiscreteLagrangian, mu: &DVector<f64>) -> ReducedDiscreteLagrangian<'a> {
    ReducedDiscreteLagrangian { ld, mu: mu.clone() }
}

impl<'a> ReducedDiscreteLagrangian<'a> {
    pub fn ld(&self) -> &'a dyn DiscreteLagrangian {
        self.ld
    }

    pub fn system(&self) -> &'a dyn MechanicalSystem {
        self.ld.system()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn h(&self) -> f64 {
        self.ld.h()
    }

    /// Momentum residual `J_d(lift(x0, 0), lift(x1, Δg)) − μ`.
    fn momentum_residual(&self, x0: &DVector<f64>, x1: &DVector<f64>, dg: &DVector<f64>) -> Result<DVector<f64>> {
        let sys = self.system();
        let zero = DVector::zeros(sys.group_dim());
        let q0 = sys.lift(x0, &zero);
        let q1 = sys.lift(x1, dg);
        sys.check_chart(&q1)?;
        Ok(discrete_momentum(self.ld, &q0, &q1)? - &self.mu)
    }

    /// Group displacement `Δg(x0, x1)` solving the momentum constraint.
    pub fn delta_g(&self, x0: &DVector<f64>, x1: &DVector<f64>, guess: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let m = self.system().group_dim();
        let start = guess.cloned().unwrap_or_else(|| DVector::zeros(m));
        let sol = newton_solve(|dg| self.momentum_residual(x0, x1, dg), &start, &NewtonOptions::default())?;
        Ok(sol.x)
    }

    /// The lifted pair `(lift(x0, g), lift(x1, g + Δg))`.
    pub fn lifted_pair(
        &self,
        x0: &DVector<f64>,
        x1: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let dg = self.delta_g(x0, x1, None)?;
        let sys = self.system();
        Ok((sys.lift(x0, g), sys.lift(x1, &(g + dg))))
    }

    /// `L̂_d(x0, x1)`.
    pub fn eval(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<f64> {
        self.eval_at(x0, x1, &DVector::zeros(self.system().group_dim()))
    }

    /// `L̂_d(x0, x1)` evaluated through a lift with base group value `g`.
    pub fn eval_at(&self, x0: &DVector<f64>, x1: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        let (q0, q1) = self.lifted_pair(x0, x1, g)?;
        self.ld.eval(&q0, &q1)
    }

    /// `Txᵀ D₁L_d` on the lifted pair with the group displacement held fixed.
    pub fn routhian_d1(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (q0, q1) = self.lifted_pair(x0, x1, &DVector::zeros(self.system().group_dim()))?;
        Ok(self.system().shape_basis().transpose() * self.ld.d1(&q0, &q1)?)
    }

    /// `Txᵀ D₂L_d` on the lifted pair with the group displacement held fixed.
    pub fn routhian_d2(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (q0, q1) = self.lifted_pair(x0, x1, &DVector::zeros(self.system().group_dim()))?;
        Ok(self.system().shape_basis().transpose() * self.ld.d2(&q0, &q1)?)
    }

    /// `(∂Δg/∂x0, ∂Δg/∂x1)` (each m×d) from the implicit function theorem.
    pub fn delta_g_jacobians(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let dg = self.delta_g(x0, x1, None)?;
        let d = x0.len();
        let f_dg = fd_jacobian(|g| self.momentum_residual(x0, x1, g), &dg, DEFAULT_FD_SCALE)?;
        let f_x0 = fd_jacobian(|y| self.momentum_residual(y, x1, &dg), x0, DEFAULT_FD_SCALE)?;
        let f_x1 = fd_jacobian(|y| self.momentum_residual(x0, y, &dg), x1, DEFAULT_FD_SCALE)?;
        let lu = f_dg.lu();
        let solve = |rhs: &DMatrix<f64>| lu.solve(&(-rhs)).ok_or(Error::SingularJacobian);
        let j0 = solve(&f_x0)?;
        let j1 = solve(&f_x1)?;
        debug_assert_eq!(j0.ncols(), d);
        Ok((j0, j1))
    }

    /// Exact `D₁L̂_d`, including the variation of `Δg`.
    pub fn d1(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (j0, _) = self.delta_g_jacobians(x0, x1)?;
        Ok(self.routhian_d1(x0, x1)? + j0.transpose() * &self.mu)
    }

    /// Exact `D₂L̂_d`, including the variation of `Δg`.
    pub fn d2(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, j1) = self.delta_g_jacobians(x0, x1)?;
        Ok(self.routhian_d2(x0, x1)? + j1.transpose() * &self.mu)
    }
}

/// The one-form `Â = Â₁ dx0 + Â₂ dx1` on `S × S`.
#[derive(Clone, Copy)]
pub struct ConnectionOneForm<'a> {
    reduced: &'a dyn ReducedSystem,
}

impl<'a> ConnectionOneForm<'a> {
    pub fn new(reduced: &'a dyn ReducedSystem) -> Self {
        Self { reduced }
    }

    pub fn reduced(&self) -> &'a dyn ReducedSystem {
        self.reduced
    }

    /// Local-connection part of `Â₁`: `−μA(x0)`.
    pub fn connection_a1(&self, x0: &DVector<f64>, _x1: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-mu_a(self.reduced, x0)?)
    }

    /// Local-connection part of `Â₂`: `μA(x1)`.
    pub fn connection_a2(&self, _x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        mu_a(self.reduced, x1)
    }

    /// Exact `Â₁ = −μA(x0) + μ ∂Δg/∂x0`.
    pub fn a1(&self, lhat: &ReducedDiscreteLagrangian<'_>, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (j0, _) = lhat.delta_g_jacobians(x0, x1)?;
        Ok(self.connection_a1(x0, x1)? + j0.transpose() * self.reduced.mu())
    }

    /// Exact `Â₂ = μA(x1) + μ ∂Δg/∂x1`.
    pub fn a2(&self, lhat: &ReducedDiscreteLagrangian<'_>, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, j1) = lhat.delta_g_jacobians(x0, x1)?;
        Ok(self.connection_a2(x0, x1)? + j1.transpose() * self.reduced.mu())
    }
}

/// A point `(x, s)` of `T*S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCotangentState {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
}

impl ReducedCotangentState {
    pub fn new(x: DVector<f64>, s: DVector<f64>) -> Self {
        Self { x, s }
    }

    /// Reduced state of a shape velocity, `s = ∂R̂/∂ẋ`.
    pub fn from_velocity(reduced: &dyn ReducedSystem, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<Self> {
        Ok(Self { x: x.clone(), s: reduced.d_routhian_dxdot(x, xdot)? })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.x.len();
        DVector::from_fn(2 * d, |i, _| if i < d { self.x[i] } else { self.s[i - d] })
    }

    pub fn from_vector(z: &DVector<f64>) -> Self {
        let d = z.len() / 2;
        Self { x: z.rows(0, d).into_owned(), s: z.rows(d, d).into_owned() }
    }
}

/// Solve the DR equations
/// `D₂L̂_d(x_prev, x_cur) + D₁L̂_d(x_cur, x_next) = Â₂(x_prev, x_cur) + Â₁(x_cur, x_next)`
/// for `x_next`.
///
/// The unknowns are `x_next` together with its group displacement, solved as
/// one Newton system with the momentum constraint appended.
pub fn dr_step(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    x_prev: &DVector<f64>,
    x_cur: &DVector<f64>,
) -> Result<DVector<f64>> {
    let back = lhat.routhian_d2(x_prev, x_cur)? - aform.connection_a2(x_prev, x_cur)?;
    let guess_dg = lhat.delta_g(x_prev, x_cur, None)?;
    let guess_x = x_cur * 2.0 - x_prev;
    let (x_next, _) = solve_forward(lhat, aform, x_cur, &(-back), &guess_x, &guess_dg)?;
    Ok(x_next)
}

/// Find `(x1, Δg)` with `(D₁L̂_d − Â₁)(x0, x1) = target` and the momentum
/// constraint satisfied.
fn solve_forward(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    x0: &DVector<f64>,
    target: &DVector<f64>,
    guess_x: &DVector<f64>,
    guess_dg: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let sys = lhat.system();
    let d = x0.len();
    let m = sys.group_dim();
    let tx_t = sys.shape_basis().transpose();
    let zero = DVector::zeros(m);
    let q0 = sys.lift(x0, &zero);
    let a1 = aform.connection_a1(x0, guess_x)?;

    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let x1 = z.rows(0, d).into_owned();
        let dg = z.rows(d, m).into_owned();
        let q1 = sys.lift(&x1, &dg);
        sys.check_chart(&q1)?;
        let shape = &tx_t * lhat.ld().d1(&q0, &q1)? - &a1 - target;
        let mom = discrete_momentum(lhat.ld(), &q0, &q1)? - lhat.mu();
        Ok(DVector::from_fn(d + m, |i, _| if i < d { shape[i] } else { mom[i - d] }))
    };
    let start = DVector::from_fn(d + m, |i, _| if i < d { guess_x[i] } else { guess_dg[i - d] });
    let sol = newton_solve(residual, &start, &NewtonOptions::default())?;
    let x1 = sol.x.rows(0, d).into_owned();
    let dg = sol.x.rows(d, m).into_owned();
    ensure_finite(&x1, "DR step")?;
    sys.check_chart(&sys.lift(&x1, &dg)).map_err(as_rejection)?;
    Ok((x1, dg))
}

/// Reduced discrete Legendre transform `F̂(x0, x1) = (x1, D₂L̂_d − Â₂)`.
pub fn reduced_legendre(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
) -> Result<ReducedCotangentState> {
    let s = lhat.routhian_d2(x0, x1)? - aform.connection_a2(x0, x1)?;
    Ok(ReducedCotangentState::new(x1.clone(), s))
}

/// Reduced minus Legendre transform `(x0, −(D₁L̂_d − Â₁))`.
pub fn reduced_legendre_minus(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
) -> Result<ReducedCotangentState> {
    let s = -(lhat.routhian_d1(x0, x1)? - aform.connection_a1(x0, x1)?);
    Ok(ReducedCotangentState::new(x0.clone(), s))
}

/// Inverse of [`reduced_legendre_minus`]: the `x1` whose pair with
/// `state.x` has reduced momentum `state.s` at the left end point.
pub fn reduced_seed(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    state: &ReducedCotangentState,
) -> Result<DVector<f64>> {
    let reduced = aform.reduced();
    let xdot = reduced.velocity_from_momentum(&state.x, &state.s)?;
    let gdot = reduced.group_velocity(&state.x, &xdot)?;
    let h = lhat.h();
    let guess_x = &state.x + xdot * h;
    let (x1, _) = solve_forward(lhat, aform, &state.x, &(-&state.s), &guess_x, &(gdot * h))?;
    Ok(x1)
}

/// Run `steps` DR steps from `(x0, x1)`; the result holds `x_0, …, x_{steps+1}`.
pub fn dr_run(
    lhat: &ReducedDiscreteLagrangian<'_>,
    aform: &ConnectionOneForm<'_>,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
    steps: usize,
) -> Trajectory<DVector<f64>> {
    let mut traj = Trajectory::new(lhat.h(), vec![x0.clone(), x1.clone()]);
    for _ in 0..steps {
        let n = traj.states.len();
        match dr_step(lhat, aform, &traj.states[n - 2], &traj.states[n - 1]) {
            Ok(x) => traj.states.push(x),
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj
}

/// Result of one RSPRK step together with the group increment needed to
/// reconstruct the unreduced motion.
#[derive(Debug, Clone, PartialEq)]
pub struct RsprkOutcome {
    pub state: ReducedCotangentState,
    pub delta_g: DVector<f64>,
}

/// One step of the reduced symplectic partitioned Runge–Kutta scheme.
///
/// With stage velocities `Ẋ_j` and
/// `Ṡ_j = ∂R̂/∂x(X_j, Ẋ_j) − i_{Ẋ_j} β_μ(X_j)`,
///
/// ```text
/// X_i = x0 + h Σ a_ij Ẋ_j
/// S_i = s0 + h Σ ã_ij Ṡ_j + [h Σ ã_ij μ ∂A/∂x(X_j) Ẋ_j − (μA(X_i) − μA(x0))]
/// S_i = ∂R̂/∂ẋ(X_i, Ẋ_i)
/// x1  = x0 + h Σ b_j Ẋ_j
/// s1  = s0 + h Σ b̃_j Ṡ_j + [h Σ b̃_j μ ∂A/∂x(X_j) Ẋ_j − (μA(x1) − μA(x0))]
/// ```
pub fn rsprk_step(
    reduced: &dyn ReducedSystem,
    tab: &ButcherTableau,
    state: &ReducedCotangentState,
    h: f64,
) -> Result<ReducedCotangentState> {
    rsprk_step_with_group(reduced, tab, state, h).map(|o| o.state)
}

/// [`rsprk_step`] returning the group increment `h Σ b_j ġ(X_j, Ẋ_j)` as well.
pub fn rsprk_step_with_group(
    reduced: &dyn ReducedSystem,
    tab: &ButcherTableau,
    state: &ReducedCotangentState,
    h: f64,
) -> Result<RsprkOutcome> {
    let s = tab.s;
    let d = state.x.len();
    let x0 = &state.x;
    let s0 = &state.s;
    let mu_a0 = mu_a(reduced, x0)?;

    let stage_x = |vel: &[DVector<f64>]| -> Vec<DVector<f64>> {
        (0..s)
            .map(|i| {
                let mut x = x0.clone();
                for (j, v) in vel.iter().enumerate() {
                    x.axpy(h * tab.a[(i, j)], v, 1.0);
                }
                x
            })
            .collect()
    };
    // Ṡ_j + μ ∂A/∂x(X_j) Ẋ_j for every stage.
    let forces = |xs: &[DVector<f64>], vel: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
        xs.iter()
            .zip(vel)
            .map(|(x, v)| {
                reduced.check_shape(x)?;
                let sdot = reduced.d_routhian_dx(x, v)? + reduced.beta_mu(x)? * v;
                Ok(sdot + mu_da_v(reduced, x, v)?)
            })
            .collect()
    };

    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let vel = split_stages(z, s, d);
        let xs = stage_x(&vel);
        let f = forces(&xs, &vel)?;
        let mut out = Vec::with_capacity(s);
        for i in 0..s {
            let mut r = reduced.d_routhian_dxdot(&xs[i], &vel[i])? - s0 + mu_a(reduced, &xs[i])? - &mu_a0;
            for (j, fj) in f.iter().enumerate() {
                r.axpy(-h * tab.a_tilde[(i, j)], fj, 1.0);
            }
            out.push(r);
        }
        Ok(stack_stages(&out))
    };

    let v0 = reduced.velocity_from_momentum(x0, s0)?;
    let guess = stack_stages(&vec![v0; s]);
    let sol = newton_solve(residual, &guess, &NewtonOptions::default())?;

    let vel = split_stages(&sol.x, s, d);
    let xs = stage_x(&vel);
    let f = forces(&xs, &vel)?;
    let mut x1 = x0.clone();
    let mut s1 = s0.clone();
    let mut dg = DVector::zeros(reduced.mu().len());
    for j in 0..s {
        x1.axpy(h * tab.b[j], &vel[j], 1.0);
        s1.axpy(h * tab.b_tilde[j], &f[j], 1.0);
        dg.axpy(h * tab.b[j], &reduced.group_velocity(&xs[j], &vel[j])?, 1.0);
    }
    reduced.check_shape(&x1).map_err(as_rejection)?;
    s1 -= mu_a(reduced, &x1)? - mu_a0;
    ensure_finite(&s1, "RSPRK momentum")?;
    Ok(RsprkOutcome { state: ReducedCotangentState::new(x1, s1), delta_g: dg })
}

/// Run `steps` RSPRK steps; entry `k` is at time `k·h`.
pub fn rsprk_run(
    reduced: &dyn ReducedSystem,
    tab: &ButcherTableau,
    initial: &ReducedCotangentState,
    h: f64,
    steps: usize,
) -> Trajectory<ReducedCotangentState> {
    integrate(h, initial.clone(), steps, |st| rsprk_step(reduced, tab, st, h))
}

/// Shape coordinates of a configuration, without angle wrapping.
pub fn shape_of(system: &dyn MechanicalSystem, q: &DVector<f64>) -> DVector<f64> {
    system.shape_of(q)
}

/// Wrap the angle-type components of a shape point into (−π, π].
pub fn wrap_shape(system: &dyn MechanicalSystem, x: &DVector<f64>) -> DVector<f64> {
    let mask = system.shape_angle_mask();
    DVector::from_fn(x.len(), |i, _| if mask[i] { wrap_angle(x[i]) } else { x[i] })
}

/// Project a configuration trajectory to shape space (`π_{Q,G}`), reporting
/// angle-type shape coordinates in (−π, π].
pub fn project(traj: &Trajectory<DVector<f64>>, system: &dyn MechanicalSystem) -> Trajectory<DVector<f64>> {
    traj.map(|q| wrap_shape(system, &system.shape_of(q)))
}

/// Sup-norm distance between shape points, measuring angle-type components
/// modulo `2π`.
pub fn shape_distance(mask: &[bool], a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (0..a.len())
        .map(|i| {
            let diff = a[i] - b[i];
            if mask[i] {
                wrap_angle(diff).abs()
            } else {
                diff.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `π_μ(q, p) = (x, Txᵀp − μA(x))`.
pub fn project_cotangent(
    system: &dyn MechanicalSystem,
    reduced: &dyn ReducedSystem,
    state: &CotangentState,
) -> Result<ReducedCotangentState> {
    let x = system.shape_of(&state.q);
    let s = system.shape_basis().transpose() * &state.p - mu_a(reduced, &x)?;
    Ok(ReducedCotangentState::new(x, s))
}

/// The cotangent state over `(x, s)` with group coordinate `g` and momentum
/// `μ`; inverse of [`project_cotangent`] on the level set.
pub fn lift_cotangent(
    system: &dyn MechanicalSystem,
    reduced: &dyn ReducedSystem,
    state: &ReducedCotangentState,
    g: &DVector<f64>,
) -> Result<CotangentState> {
    let q = system.lift(&state.x, g);
    let d = system.shape_dim();
    let m = system.group_dim();
    let tx = system.shape_basis();
    let tg = system.group_basis();
    let n = system.dim();
    let basis_t = DMatrix::from_fn(n, n, |i, j| if i < d { tx[(j, i)] } else { tg[(j, i - d)] });
    let px = &state.s + mu_a(reduced, &state.x)?;
    let mu = reduced.mu();
    let rhs = DVector::from_fn(n, |i, _| if i < d { px[i] } else { mu[i - d] });
    debug_assert_eq!(d + m, n);
    Ok(CotangentState::new(q, lu_solve(&basis_t, &rhs)?))
}

/// Representative of `x` whose angle-type components lie within `π` of
/// `reference`.
pub fn unwrap_towards(mask: &[bool], reference: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| if mask[i] { reference[i] + wrap_angle(x[i] - reference[i]) } else { x[i] })
}

/// Rebuild the configuration trajectory over `shape` from the seed pair
/// `(q0, q1)` by solving the momentum constraint for each group increment.
///
/// The seed must satisfy `[q0] = x0`, `[q1] = x1` and `J_d(q0, q1) = μ` to
/// within [`SEED_MOMENTUM_TOL`]. Angle-type shape coordinates may be wrapped;
/// they are unwrapped along the way.
pub fn reconstruct(
    shape: &Trajectory<DVector<f64>>,
    q0: &DVector<f64>,
    q1: &DVector<f64>,
    ld: &dyn DiscreteLagrangian,
    mu: &DVector<f64>,
) -> Trajectory<DVector<f64>> {
    let sys = ld.system();
    let mut out = Trajectory::new(shape.h, Vec::with_capacity(shape.len()));
    let mask = sys.shape_angle_mask();
    let check = || -> Result<()> {
        if shape.len() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: shape.len() });
        }
        let seed_mom = discrete_momentum(ld, q0, q1)?;
        let dev = (&seed_mom - mu).amax();
        if dev > SEED_MOMENTUM_TOL {
            return Err(Error::MomentumMismatch { expected: mu.amax(), found: seed_mom.amax() });
        }
        let tol = 1e-9;
        if shape_distance(&mask, &sys.shape_of(q0), &shape.states[0]) > tol
            || shape_distance(&mask, &sys.shape_of(q1), &shape.states[1]) > tol
        {
            return Err(Error::StepRejected("seed pair does not lie over the first two shape points".into()));
        }
        Ok(())
    };
    if let Err(e) = check() {
        out.failure = Some(e);
        return out;
    }
    out.states.push(q0.clone());
    out.states.push(q1.clone());

    let mut increment = sys.group_of(q1) - sys.group_of(q0);
    let mut x_prev = sys.shape_of(q1);
    for k in 2..shape.len() {
        let q_cur = out.states[k - 1].clone();
        let g_cur = sys.group_of(&q_cur);
        let x_next = unwrap_towards(&mask, &x_prev, &shape.states[k]);
        let residual = |g: &DVector<f64>| -> Result<DVector<f64>> {
            let q = sys.lift(&x_next, g);
            sys.check_chart(&q)?;
            Ok(discrete_momentum(ld, &q_cur, &q)? - mu)
        };
        match newton_solve(residual, &(&g_cur + &increment), &NewtonOptions::default()) {
            Ok(sol) => {
                increment = &sol.x - &g_cur;
                out.states.push(sys.lift(&x_next, &sol.x));
                x_prev = x_next;
            }
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{del_run, del_step, midpoint_ld, seed_pair};
    use crate::fd::fd_gradient;
    use crate::systems::{DoubleSphericalPendulum, DspParams, DspReduced, SatelliteJ2, SatelliteReduced};

    fn v(values: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(values)
    }

    fn dsp() -> DoubleSphericalPendulum {
        DoubleSphericalPendulum::new(DspParams::default()).unwrap()
    }

    #[test]
    fn satellite_group_displacement_closed_form() {
        let sat = SatelliteJ2::new(0.05).unwrap();
        let h = 0.01;
        let ld = midpoint_ld(&sat, h).unwrap();
        let lhat = reduce_lagrangian(&ld, &v(&[1.0]));
        let dg = lhat.delta_g(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), None).unwrap();
        assert!((dg[0] - 0.01).abs() < 1e-14);
        let dg = lhat.delta_g(&v(&[1.0, 0.0]), &v(&[1.1, 0.0]), None).unwrap();
        assert!((dg[0] - h / (1.05 * 1.05)).abs() < 1e-14);
    }

    #[test]
    fn reduced_lagrangian_ignores_base_group_value() {
        let sys = dsp();
        let ld = midpoint_ld(&sys, 0.01).unwrap();
        let lhat = reduce_lagrangian(&ld, &v(&[0.7]));
        let x0 = v(&[0.4, 0.5, 0.3]);
        let x1 = v(&[0.41, 0.49, 0.31]);
        let base = lhat.eval(&x0, &x1).unwrap();
        for g in [1.0, 2.0, -3.0] {
            let val = lhat.eval_at(&x0, &x1, &v(&[g])).unwrap();
            assert!((val - base).abs() < 1e-13 * base.abs().max(1.0));
        }
    }

    #[test]
    fn exact_partials_match_finite_differences() {
        let sys = dsp();
        let ld = midpoint_ld(&sys, 0.01).unwrap();
        let mu = v(&[0.7]);
        let lhat = reduce_lagrangian(&ld, &mu);
        let x0 = v(&[0.4, 0.5, 0.3]);
        let x1 = v(&[0.41, 0.49, 0.31]);
        let g0 = fd_gradient(|y| lhat.eval(y, &x1), &x0, 1.0).unwrap();
        let g1 = fd_gradient(|y| lhat.eval(&x0, y), &x1, 1.0).unwrap();
        assert!((lhat.d1(&x0, &x1).unwrap() - g0).amax() < 1e-6);
        assert!((lhat.d2(&x0, &x1).unwrap() - g1).amax() < 1e-6);
    }

    #[test]
    fn both_splittings_give_the_same_difference() {
        let sys = dsp();
        let red = DspReduced::new(sys, 0.7);
        let ld = midpoint_ld(&sys, 0.01).unwrap();
        let lhat = reduce_lagrangian(&ld, red.mu());
        let aform = ConnectionOneForm::new(&red);
        let x0 = v(&[0.4, 0.5, 0.3]);
        let x1 = v(&[0.41, 0.49, 0.31]);
        let exact1 = lhat.d1(&x0, &x1).unwrap() - aform.a1(&lhat, &x0, &x1).unwrap();
        let split1 = lhat.routhian_d1(&x0, &x1).unwrap() - aform.connection_a1(&x0, &x1).unwrap();
        let exact2 = lhat.d2(&x0, &x1).unwrap() - aform.a2(&lhat, &x0, &x1).unwrap();
        let split2 = lhat.routhian_d2(&x0, &x1).unwrap() - aform.connection_a2(&x0, &x1).unwrap();
        assert!((exact1 - split1).amax() < 1e-12);
        assert!((exact2 - split2).amax() < 1e-12);
    }

    #[test]
    fn dr_matches_projected_del_for_satellite() {
        let sat = SatelliteJ2::new(0.05).unwrap();
        let ld = midpoint_ld(&sat, 0.1).unwrap();
        let q0 = v(&[1.0, 0.0, 0.0]);
        let q1 = seed_pair(&ld, &q0, &v(&[0.0, 0.98, 0.2])).unwrap();
        let mu = discrete_momentum(&ld, &q0, &q1).unwrap();
        let q2 = del_step(&ld, &q0, &q1, None).unwrap();
        let red = SatelliteReduced::new(sat, mu[0]);
        let lhat = reduce_lagrangian(&ld, &mu);
        let aform = ConnectionOneForm::new(&red);
        let x2 = dr_step(&lhat, &aform, &sat.shape_of(&q0), &sat.shape_of(&q1)).unwrap();
        assert!((x2 - sat.shape_of(&q2)).amax() < 1e-12);
    }

    #[test]
    fn reduced_seed_inverts_minus_transform() {
        let sys = dsp();
        let red = DspReduced::new(sys, 0.7);
        let ld = midpoint_ld(&sys, 0.01).unwrap();
        let lhat = reduce_lagrangian(&ld, red.mu());
        let aform = ConnectionOneForm::new(&red);
        let x0 = v(&[0.4, 0.5, 0.3]);
        let x1 = v(&[0.41, 0.49, 0.31]);
        let state = reduced_legendre_minus(&lhat, &aform, &x0, &x1).unwrap();
        let back = reduced_seed(&lhat, &aform, &state).unwrap();
        assert!((back - x1).amax() < 1e-11);
    }

    #[test]
    fn cotangent_projection_round_trip() {
        let sys = dsp();
        let red = DspReduced::new(sys, 0.7);
        let state = ReducedCotangentState::new(v(&[0.4, 0.5, 0.3]), v(&[0.1, -0.2, 0.05]));
        let lifted = lift_cotangent(&sys, &red, &state, &v(&[1.3])).unwrap();
        assert!(((sys.group_basis().transpose() * &lifted.p)[0] - 0.7).abs() < 1e-13);
        let back = project_cotangent(&sys, &red, &lifted).unwrap();
        assert!((back.x - state.x).amax() < 1e-15);
        assert!((back.s - state.s).amax() < 1e-13);
    }

    #[test]
    fn reconstruction_recovers_circular_orbit() {
        let sat = SatelliteJ2::new(0.0).unwrap();
        let ld = midpoint_ld(&sat, 0.05).unwrap();
        let q0 = v(&[1.0, 0.0, 0.0]);
        let q1 = seed_pair(&ld, &q0, &v(&[0.0, 1.0, 0.0])).unwrap();
        let traj = del_run(&ld, &q0, &q1, 200);
        let mu = discrete_momentum(&ld, &q0, &q1).unwrap();
        let rebuilt = reconstruct(&project(&traj, &sat), &q0, &q1, &ld, &mu);
        assert!(rebuilt.is_complete());
        for (a, b) in rebuilt.states.iter().zip(&traj.states) {
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn reconstruction_rejects_off_level_seed() {
        let sat = SatelliteJ2::new(0.0).unwrap();
        let ld = midpoint_ld(&sat, 0.05).unwrap();
        let q0 = v(&[1.0, 0.0, 0.0]);
        let q1 = v(&[1.0, 0.05, 0.0]);
        let traj = del_run(&ld, &q0, &q1, 5);
        let out = reconstruct(&project(&traj, &sat), &q0, &q1, &ld, &v(&[2.0]));
        assert!(matches!(out.failure, Some(Error::MomentumMismatch { .. })));
        assert!(out.is_empty());
    }

    #[test]
    fn shape_distance_is_angle_aware() {
        let mask = [false, false, true];
        let a = v(&[0.1, 0.2, 3.1]);
        let b = v(&[0.1, 0.2, -3.1]);
        assert!((shape_distance(&mask, &a, &b) - (2.0 * std::f64::consts::PI - 6.2)).abs() < 1e-12);
        let u = unwrap_towards(&mask, &a, &b);
        assert!((u[2] - (2.0 * std::f64::consts::PI - 3.1)).abs() < 1e-12);
    }
}
