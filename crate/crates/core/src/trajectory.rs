//! Fixed-step trajectories.

use crate::error::{Error, Result};

/// An ordered sequence of states sampled at `t_k = k·h`.
///
/// A run that fails part way keeps the states computed so far and records
/// the error in `failure`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub h: f64,
    pub states: Vec<T>,
    pub failure: Option<Error>,
}

impl<T> Trajectory<T> {
    pub fn new(h: f64, states: Vec<T>) -> Self {
        Self { h, states, failure: None }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&T> {
        self.states.last()
    }

    /// The trajectory if the run completed, otherwise its error.
    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Trajectory<U> {
        Trajectory { h: self.h, states: self.states.iter().map(f).collect(), failure: self.failure.clone() }
    }
}

/// Iterate a one-step map `steps` times from `initial`.
pub fn integrate<T>(h: f64, initial: T, steps: usize, mut step: impl FnMut(&T) -> Result<T>) -> Trajectory<T> {
    let mut traj = Trajectory::new(h, Vec::with_capacity(steps + 1));
    traj.states.push(initial);
    for _ in 0..steps {
        let next = step(traj.states.last().expect("trajectory starts non-empty"));
        match next {
            Ok(s) => traj.states.push(s),
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj
}
