//! Discrete Routh reduction for mechanical systems with an abelian symmetry.
//!
//! The crate provides
//!
//! * variational integrators built from discrete Lagrangians
//!   ([`discrete`]), with the discrete momentum map and discrete Legendre
//!   transforms;
//! * symplectic partitioned Runge–Kutta methods with Gauss tableaux
//!   ([`sprk`]);
//! * the reduced picture on shape space ([`reduction`]): the reduced
//!   discrete Lagrangian, the discrete Routh equations, the reduced SPRK
//!   scheme with its connection and magnetic corrections, projection and
//!   reconstruction;
//! * two worked systems ([`systems`]): a satellite around an oblate planet
//!   and the double spherical pendulum;
//! * numerical diagnostics ([`diagnostics`]) for momentum and energy
//!   conservation, symplecticity, commutation of reduction with
//!   discretization, and convergence order.
//!
//! ```
//! use discrete_routh::discrete::{del_step, discrete_momentum, midpoint_ld};
//! use discrete_routh::systems::SatelliteJ2;
//! use nalgebra::DVector;
//!
//! let sat = SatelliteJ2::new(0.0).unwrap();
//! let ld = midpoint_ld(&sat, 0.01).unwrap();
//! let q0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
//! let q1 = DVector::from_vec(vec![1.0, 0.01, 0.0]);
//! let q2 = del_step(&ld, &q0, &q1, None).unwrap();
//! let before = discrete_momentum(&ld, &q0, &q1).unwrap();
//! let after = discrete_momentum(&ld, &q1, &q2).unwrap();
//! assert!((before - after).amax() < 1e-12);
//! ```

pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod fd;
pub mod newton;
pub mod reduction;
pub mod sprk;
pub mod system;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};
pub use system::{ConfigPoint, GroupElement, MechanicalSystem, Momentum, ReducedSystem, ShapePoint};
pub use trajectory::Trajectory;
