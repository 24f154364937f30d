//! Central finite differences.
//!
//! Used as the verification oracle for analytic derivatives and as the
//! Jacobian fallback inside [`crate::newton`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default multiplier on `sqrt(machine epsilon)`; gives steps near 1.5e-6.
pub const DEFAULT_FD_SCALE: f64 = 100.0;

/// Step used for coordinate `x`: `scale * sqrt(eps) * max(1, |x|)`.
#[inline]
pub fn fd_step(x: f64, scale: f64) -> f64 {
    scale * f64::EPSILON.sqrt() * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, scale: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = fd_step(x[i], scale);
        probe[i] = x[i] + h;
        let fp = finite(f(&probe)?)?;
        probe[i] = x[i] - h;
        let fm = finite(f(&probe)?)?;
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector function, `J[i][j] = ∂f_i/∂x_j`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut probe = x.clone();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = fd_step(x[j], scale);
        probe[j] = x[j] + h;
        let fp = f(&probe)?;
        probe[j] = x[j] - h;
        let fm = f(&probe)?;
        probe[j] = x[j];
        if fp.len() != fm.len() {
            return Err(Error::DimensionMismatch { expected: fp.len(), found: fm.len() });
        }
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("Jacobian column {j}")));
        }
        columns.push(col);
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| columns[j][i]))
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue(format!("function value {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_quadratic() {
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let g = fd_gradient(|x| Ok(x.dot(x)), &x, DEFAULT_FD_SCALE).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-7);
        assert!((g[1] - 4.0).abs() < 1e-7);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let x = DVector::from_vec(vec![0.3, -7.0, 12.0]);
        let g = fd_gradient(|_| Ok(4.25), &x, DEFAULT_FD_SCALE).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_of_sine() {
        let x = DVector::from_vec(vec![0.5]);
        let g = fd_gradient(|x| Ok(x[0].sin()), &x, DEFAULT_FD_SCALE).unwrap();
        assert!((g[0] - 0.877_582_561_9).abs() < 1e-8);
    }

    #[test]
    fn non_finite_value_is_reported() {
        let x = DVector::from_vec(vec![0.0]);
        let err = fd_gradient(|x| Ok(1.0 / (x[0] - fd_step(0.0, 1.0))), &x, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue(_)));
    }

    #[test]
    fn jacobian_of_linear_map() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.5, 0.0]);
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let jac = fd_jacobian(|x| Ok(&a * x), &x, DEFAULT_FD_SCALE).unwrap();
        assert!((jac - a).amax() < 1e-9);
    }
}
