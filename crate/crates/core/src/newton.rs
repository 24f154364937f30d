//! Dense Newton iteration for the implicit equations of every integrator
//! in this crate (DEL, DR and Runge–Kutta stage equations).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd::{fd_jacobian, DEFAULT_FD_SCALE};

/// Halvings attempted when a trial iterate cannot be evaluated.
const MAX_BACKTRACK: usize = 12;

/// A correction below `STAGNATION_STEP·(1 + ‖x‖)` is at the roundoff level
/// of the iterate.
const STAGNATION_STEP: f64 = 16.0 * f64::EPSILON;

/// Largest multiple of the tolerance accepted once the iteration stagnates
/// at roundoff.
const STAGNATION_RESIDUAL_FACTOR: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Sup-norm residual tolerance. Iterates whose Newton correction is at
    /// roundoff level are also accepted when the residual is within a
    /// fixed factor of `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference scale used when no analytic Jacobian is supplied.
    pub fd_scale: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, fd_scale: DEFAULT_FD_SCALE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve `residual(x) = 0` starting from `guess`, with a central-difference
/// Jacobian.
pub fn newton_solve<F>(residual: F, guess: &DVector<f64>, opts: &NewtonOptions) -> Result<NewtonSolution>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let scale = opts.fd_scale;
    run(&residual, &|x: &DVector<f64>| fd_jacobian(&residual, x, scale), guess, opts)
}

/// Solve `residual(x) = 0` with a caller-supplied Jacobian.
pub fn newton_solve_with_jacobian<F, J>(
    residual: F,
    jacobian: J,
    guess: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    run(&residual, &jacobian, guess, opts)
}

/// Solve a dense square system by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    let sol = a.clone().lu().solve(b).ok_or(Error::SingularJacobian)?;
    if sol.iter().all(|v| v.is_finite()) {
        Ok(sol)
    } else {
        Err(Error::SingularJacobian)
    }
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn evaluate<F>(residual: &F, x: &DVector<f64>) -> Result<(DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let r = residual(x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("Newton residual".into()));
    }
    let n = sup_norm(&r);
    Ok((r, n))
}

fn run<F, J>(residual: &F, jacobian: &J, guess: &DVector<f64>, opts: &NewtonOptions) -> Result<NewtonSolution>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = guess.clone();
    let (mut r, mut norm) = evaluate(residual, &x)?;
    if norm <= opts.tol {
        return Ok(NewtonSolution { x, iterations: 0, residual: norm });
    }

    for iter in 1..=opts.max_iter {
        let dx = lu_solve(&jacobian(&x)?, &(-&r))?;
        let stagnated = sup_norm(&dx) <= STAGNATION_STEP * (1.0 + sup_norm(&x));

        // Backtrack only when the trial point cannot be evaluated (e.g. it
        // left a chart); otherwise take the full Newton step.
        let mut lambda = 1.0;
        let mut last_err = None;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACK {
            let trial = &x + &dx * lambda;
            match evaluate(residual, &trial) {
                Ok((rt, nt)) => {
                    accepted = Some((trial, rt, nt));
                    break;
                }
                Err(e) => {
                    last_err = Some(e);
                    lambda *= 0.5;
                }
            }
        }
        let Some((xn, rn, nn)) = accepted else {
            return Err(last_err.unwrap_or(Error::NoConvergence { iterations: iter, residual: norm }));
        };
        x = xn;
        r = rn;
        norm = nn;

        if norm <= opts.tol || (stagnated && norm <= STAGNATION_RESIDUAL_FACTOR * opts.tol) {
            // One polishing step drives the solution to roundoff level so
            // that repeated solves along a trajectory do not accumulate the
            // tolerance.
            let mut iterations = iter;
            if let Ok(jac) = jacobian(&x) {
                if let Ok(dx) = lu_solve(&jac, &(-&r)) {
                    let trial = &x + dx;
                    if let Ok((_, np)) = evaluate(residual, &trial) {
                        if np <= norm {
                            x = trial;
                            norm = np;
                            iterations += 1;
                        }
                    }
                }
            }
            return Ok(NewtonSolution { x, iterations, residual: norm });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn square_root_of_four() {
        let sol = newton_solve(|x| Ok(scalar(x[0] * x[0] - 4.0)), &scalar(3.0), &NewtonOptions::default()).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn guess_already_a_root() {
        let sol = newton_solve(|x| Ok(x.clone()), &scalar(0.0), &NewtonOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x[0], 0.0);
    }

    /// Bisection on [0, 1]; independent of the Newton path.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dottie_number_matches_bisection() {
        let oracle = bisect(|x| x.cos() - x, 0.0, 1.0);
        assert!((oracle - 0.739_085_133_2).abs() < 1e-9);
        let sol = newton_solve(|x| Ok(scalar(x[0].cos() - x[0])), &scalar(1.0), &NewtonOptions::default()).unwrap();
        assert!((sol.x[0] - oracle).abs() < 1e-9);
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn analytic_jacobian_path() {
        let f = |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[0] * x[0] + x[1] - 3.0, x[0] - x[1] * x[1] + 3.0]));
        let j = |x: &DVector<f64>| Ok(DMatrix::from_row_slice(2, 2, &[2.0 * x[0], 1.0, 1.0, -2.0 * x[1]]));
        let sol = newton_solve_with_jacobian(f, j, &DVector::from_vec(vec![1.5, 1.5]), &NewtonOptions::default())
            .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_no_convergence() {
        let opts = NewtonOptions { max_iter: 5, ..Default::default() };
        let err = newton_solve(|x| Ok(scalar(x[0] * x[0] + 1.0)), &scalar(0.5), &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. } | Error::SingularJacobian));
    }

    #[test]
    fn accepts_roundoff_stagnation_at_large_iterates() {
        // The spacing of doubles near 3e4 times the slope exceeds the
        // residual tolerance, so only the stagnation test can stop here.
        let f = |x: &DVector<f64>| Ok(scalar(10.0 * x[0] - 300_000.1));
        let sol = newton_solve(f, &scalar(29_000.0), &NewtonOptions::default()).unwrap();
        assert!((sol.x[0] - 30_000.01).abs() < 1e-10);
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn reports_singular_jacobian() {
        let err = newton_solve_with_jacobian(
            |x| Ok(scalar(x[0] - 1.0)),
            |_| Ok(DMatrix::zeros(1, 1)),
            &scalar(0.0),
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::SingularJacobian);
    }

    #[test]
    fn deterministic() {
        let run = || newton_solve(|x| Ok(scalar(x[0].exp() - 3.0 * x[0])), &scalar(0.2), &NewtonOptions::default());
        let a = run().unwrap();
        let b = run().unwrap();
        assert_eq!(a.x[0].to_bits(), b.x[0].to_bits());
    }
}
