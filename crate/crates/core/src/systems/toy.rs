//! Small closed-form systems used as oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::system::MechanicalSystem;

/// `L = ½‖q̇‖²` in `n` dimensions, with the last coordinate treated as a
/// translational symmetry.
#[derive(Debug, Clone, Copy)]
pub struct FreeParticle {
    n: usize,
}

impl FreeParticle {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "free particle needs at least one coordinate");
        Self { n }
    }
}

impl MechanicalSystem for FreeParticle {
    fn dim(&self) -> usize {
        self.n
    }

    fn lagrangian(&self, _q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * qdot.norm_squared())
    }

    fn dl_dq(&self, q: &DVector<f64>, _qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::zeros(q.len()))
    }

    fn dl_dqdot(&self, _q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(qdot.clone())
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.n, self.n))
    }

    fn shape_basis(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n - 1)
    }

    fn group_basis(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, 1, |i, _| if i == self.n - 1 { 1.0 } else { 0.0 })
    }

    fn shape_projection(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n - 1, self.n)
    }

    fn group_projection(&self) -> DMatrix<f64> {
        self.group_basis().transpose()
    }

    fn check_chart(&self, _q: &DVector<f64>) -> Result<()> {
        Ok(())
    }
}

/// `L = ½q̇² − ½q²`: one degree of freedom, no symmetry (`m = 0`).
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicOscillator;

impl MechanicalSystem for HarmonicOscillator {
    fn dim(&self) -> usize {
        1
    }

    fn group_dim(&self) -> usize {
        0
    }

    fn lagrangian(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * qdot[0] * qdot[0] - 0.5 * q[0] * q[0])
    }

    fn dl_dq(&self, q: &DVector<f64>, _qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-q)
    }

    fn dl_dqdot(&self, _q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(qdot.clone())
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(1, 1))
    }

    fn shape_basis(&self) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn group_basis(&self) -> DMatrix<f64> {
        DMatrix::zeros(1, 0)
    }

    fn shape_projection(&self) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn group_projection(&self) -> DMatrix<f64> {
        DMatrix::zeros(0, 1)
    }

    fn check_chart(&self, _q: &DVector<f64>) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle_energy() {
        let sys = FreeParticle::new(3);
        let e = sys.energy(&DVector::zeros(3), &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(e, 0.5);
    }

    #[test]
    fn oscillator_has_no_group() {
        let sys = HarmonicOscillator;
        assert_eq!(sys.group_dim(), 0);
        assert!(sys.group_indices().is_empty());
        assert_eq!(sys.shape_dim(), 1);
    }
}
