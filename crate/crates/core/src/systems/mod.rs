//! Concrete mechanical systems.

pub mod pendulum;
pub mod satellite;
pub mod toy;

pub use pendulum::{DoubleSphericalPendulum, DspParams, DspReduced};
pub use satellite::{SatelliteJ2, SatelliteReduced};
