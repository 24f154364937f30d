//! Symplectic partitioned Runge–Kutta methods on `T*Q`.
//!
//! The stage equations are written in velocity form. With stage velocities
//! `V_j` and `P_j = ∂L/∂q̇(Q_j, V_j)`,
//!
//! ```text
//! Q_i = q0 + h Σ_j a_ij V_j
//! P_i = p0 + h Σ_j ã_ij ∂L/∂q(Q_j, V_j)
//! q1  = q0 + h Σ_j b_j V_j
//! p1  = p0 + h Σ_j b̃_j ∂L/∂q(Q_j, V_j)
//! ```
//!
//! which is the partitioned Runge–Kutta method for the Hamiltonian obtained
//! from `L` by Legendre transform, with the inner Legendre inversion folded
//! into the single Newton system over all stage velocities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::newton::{newton_solve, NewtonOptions};
use crate::system::{ensure_finite, MechanicalSystem};
use crate::trajectory::{integrate, Trajectory};

const SYMPLECTIC_TOL: f64 = 1e-14;

/// Coefficients of a partitioned Runge–Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub s: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DVector<f64>,
    pub order: u32,
}

impl ButcherTableau {
    /// A non-partitioned method (`ã = a`, `b̃ = b`).
    pub fn single(a: DMatrix<f64>, b: DVector<f64>, order: u32) -> Self {
        Self { s: b.len(), a_tilde: a.clone(), b_tilde: b.clone(), a, b, order }
    }

    /// Stage nodes `c_i = Σ_j a_ij`.
    pub fn nodes(&self) -> DVector<f64> {
        DVector::from_fn(self.s, |i, _| self.a.row(i).sum())
    }
}

/// Gauss–Legendre collocation with `s` stages (order `2s`).
pub fn gauss_tableau(s: usize) -> Result<ButcherTableau> {
    match s {
        1 => Ok(ButcherTableau::single(DMatrix::from_element(1, 1, 0.5), DVector::from_element(1, 1.0), 2)),
        2 => {
            let r = 3.0_f64.sqrt() / 6.0;
            let a = DMatrix::from_row_slice(2, 2, &[0.25, 0.25 - r, 0.25 + r, 0.25]);
            Ok(ButcherTableau::single(a, DVector::from_vec(vec![0.5, 0.5]), 4))
        }
        other => Err(Error::UnsupportedStageCount(other)),
    }
}

/// The classical explicit fourth-order Runge–Kutta tableau.
pub fn classical_rk4_tableau() -> ButcherTableau {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    );
    let b = DVector::from_vec(vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
    ButcherTableau::single(a, b, 4)
}

/// `b_i ã_ij + b̃_j a_ji = b_i b̃_j` for all `i, j`, and `b = b̃`.
pub fn check_symplecticity(tab: &ButcherTableau) -> bool {
    let s = tab.s;
    if tab.a.shape() != (s, s) || tab.a_tilde.shape() != (s, s) || tab.b.len() != s || tab.b_tilde.len() != s {
        return false;
    }
    if (&tab.b - &tab.b_tilde).amax() > SYMPLECTIC_TOL {
        return false;
    }
    (0..s).all(|i| {
        (0..s).all(|j| {
            let lhs = tab.b[i] * tab.a_tilde[(i, j)] + tab.b_tilde[j] * tab.a[(j, i)];
            (lhs - tab.b[i] * tab.b_tilde[j]).abs() <= SYMPLECTIC_TOL
        })
    })
}

/// A point `(q, p)` of the cotangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl CotangentState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p }
    }

    /// Cotangent state of a velocity initial condition.
    pub fn from_velocity(system: &dyn MechanicalSystem, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<Self> {
        Ok(Self { q: q.clone(), p: system.dl_dqdot(q, qdot)? })
    }

    /// Flatten to `(q, p)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.q.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.p[i - n] })
    }

    pub fn from_vector(z: &DVector<f64>) -> Self {
        let n = z.len() / 2;
        Self { q: z.rows(0, n).into_owned(), p: z.rows(n, n).into_owned() }
    }
}

fn stage_positions(tab: &ButcherTableau, q0: &DVector<f64>, vel: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    (0..tab.s)
        .map(|i| {
            let mut q = q0.clone();
            for (j, v) in vel.iter().enumerate() {
                q.axpy(h * tab.a[(i, j)], v, 1.0);
            }
            q
        })
        .collect()
}

pub(crate) fn split_stages(z: &DVector<f64>, s: usize, n: usize) -> Vec<DVector<f64>> {
    (0..s).map(|i| z.rows(i * n, n).into_owned()).collect()
}

pub(crate) fn stack_stages(parts: &[DVector<f64>]) -> DVector<f64> {
    let n = parts.first().map_or(0, |p| p.len());
    DVector::from_fn(parts.len() * n, |k, _| parts[k / n][k % n])
}

/// One step of the partitioned Runge–Kutta method `tab` for the Hamiltonian
/// flow of `system`.
pub fn sprk_step(system: &dyn MechanicalSystem, tab: &ButcherTableau, state: &CotangentState, h: f64) -> Result<CotangentState> {
    let n = state.q.len();
    let s = tab.s;
    let q0 = &state.q;
    let p0 = &state.p;

    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let vel = split_stages(z, s, n);
        let pos = stage_positions(tab, q0, &vel, h);
        let mut forces = Vec::with_capacity(s);
        for (q, v) in pos.iter().zip(&vel) {
            system.check_chart(q)?;
            forces.push(system.dl_dq(q, v)?);
        }
        let mut out = Vec::with_capacity(s);
        for i in 0..s {
            let mut r = system.dl_dqdot(&pos[i], &vel[i])? - p0;
            for (j, f) in forces.iter().enumerate() {
                r.axpy(-h * tab.a_tilde[(i, j)], f, 1.0);
            }
            out.push(r);
        }
        Ok(stack_stages(&out))
    };

    let v0 = system.velocity_from_momentum(q0, p0)?;
    let guess = stack_stages(&vec![v0; s]);
    let sol = newton_solve(residual, &guess, &NewtonOptions::default())?;

    let vel = split_stages(&sol.x, s, n);
    let pos = stage_positions(tab, q0, &vel, h);
    let mut q1 = q0.clone();
    let mut p1 = p0.clone();
    for j in 0..s {
        q1.axpy(h * tab.b[j], &vel[j], 1.0);
        p1.axpy(h * tab.b_tilde[j], &system.dl_dq(&pos[j], &vel[j])?, 1.0);
    }
    ensure_finite(&q1, "SPRK position")?;
    ensure_finite(&p1, "SPRK momentum")?;
    system.check_chart(&q1).map_err(|e| match e {
        Error::SingularConfiguration(m) => Error::StepRejected(m),
        other => other,
    })?;
    Ok(CotangentState::new(q1, p1))
}

/// Run `steps` SPRK steps; entry `k` of the result is at time `k·h`.
pub fn sprk_run(
    system: &dyn MechanicalSystem,
    tab: &ButcherTableau,
    initial: &CotangentState,
    h: f64,
    steps: usize,
) -> Trajectory<CotangentState> {
    integrate(h, initial.clone(), steps, |st| sprk_step(system, tab, st, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::toy::{FreeParticle, HarmonicOscillator};

    fn v(values: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(values)
    }

    #[test]
    fn gauss_coefficients() {
        let t1 = gauss_tableau(1).unwrap();
        assert_eq!(t1.b[0], 1.0);
        assert_eq!(t1.a[(0, 0)], 0.5);
        let t2 = gauss_tableau(2).unwrap();
        assert_eq!(t2.b, v(&[0.5, 0.5]));
        assert!((t2.a[(0, 1)] + 0.038_675_1).abs() < 1e-7);
        let nodes = t2.nodes();
        assert!((nodes[0] - (0.5 - 3.0_f64.sqrt() / 6.0)).abs() < 1e-15);
        // Collocation conditions Σ_j a_ij c_j^(k−1) = c_i^k / k for k = 1, 2.
        for i in 0..2 {
            for k in 1..=2 {
                let lhs: f64 = (0..2).map(|j| t2.a[(i, j)] * nodes[j].powi(k - 1)).sum();
                assert!((lhs - nodes[i].powi(k) / k as f64).abs() < 1e-15);
            }
        }
        assert_eq!(gauss_tableau(3).unwrap_err(), Error::UnsupportedStageCount(3));
    }

    #[test]
    fn symplecticity_predicate() {
        assert!(check_symplecticity(&gauss_tableau(1).unwrap()));
        assert!(check_symplecticity(&gauss_tableau(2).unwrap()));
        assert!(!check_symplecticity(&classical_rk4_tableau()));
        let euler = ButcherTableau {
            s: 1,
            a: DMatrix::zeros(1, 1),
            b: v(&[1.0]),
            a_tilde: DMatrix::from_element(1, 1, 1.0),
            b_tilde: v(&[1.0]),
            order: 1,
        };
        assert!(check_symplecticity(&euler));
    }

    #[test]
    fn free_particle_is_exact() {
        let sys = FreeParticle::new(3);
        for s in [1, 2] {
            let tab = gauss_tableau(s).unwrap();
            let st = CotangentState::new(v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]));
            let out = sprk_step(&sys, &tab, &st, 0.1).unwrap();
            assert!((out.q - v(&[0.1, 0.0, 0.0])).amax() < 1e-14);
            assert!((out.p - v(&[1.0, 0.0, 0.0])).amax() < 1e-14);
        }
    }

    #[test]
    fn implicit_midpoint_on_oscillator() {
        let h = 0.1;
        let sys = HarmonicOscillator;
        let tab = gauss_tableau(1).unwrap();
        let out = sprk_step(&sys, &tab, &CotangentState::new(v(&[1.0]), v(&[0.0])), h).unwrap();
        let c = 1.0 + h * h / 4.0;
        assert!((out.q[0] - (1.0 - h * h / 4.0) / c).abs() < 1e-12);
        assert!((out.p[0] + h / c).abs() < 1e-12);
    }

    #[test]
    fn flat_vector_round_trip() {
        let st = CotangentState::new(v(&[1.0, 2.0]), v(&[3.0, 4.0]));
        assert_eq!(CotangentState::from_vector(&st.to_vector()), st);
    }
}
