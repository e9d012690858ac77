use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, GramAccumulator, Matrix};
use crate::scalar::Real;

/// Linear map from the augmented state `[r; 1]` to the scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout<T> {
    /// `D_r + 1` weights; the last multiplies the constant bias input.
    pub weights: Vec<T>,
}

impl<T: Real> Readout<T> {
    #[inline]
    pub fn apply(&self, state: &[T]) -> T {
        let (w, bias) = self.weights.split_at(self.weights.len() - 1);
        w.iter().zip(state).map(|(&a, &b)| a * b).sum::<T>() + bias[0]
    }
}

/// Streaming ridge regression on augmented reservoir states.
#[derive(Debug, Clone)]
pub struct ReadoutTrainer<T> {
    acc: GramAccumulator<T>,
    row: Vec<T>,
}

impl<T: Real> ReadoutTrainer<T> {
    pub fn new(reservoir_size: usize) -> Self {
        Self {
            acc: GramAccumulator::new(reservoir_size + 1),
            row: vec![T::one(); reservoir_size + 1],
        }
    }

    pub fn push(&mut self, state: &[T], target: T) {
        let n = self.row.len() - 1;
        self.row[..n].copy_from_slice(state);
        self.acc.push(&self.row, target);
    }

    pub fn rows(&self) -> usize {
        self.acc.rows()
    }

    /// Solve `(SᵀS + β·I) w = Sᵀy`.
    pub fn solve(self, ridge: T) -> Result<Readout<T>> {
        let (mut gram, rhs) = self.acc.finish();
        for i in 0..gram.rows() {
            let v = gram.get(i, i) + ridge;
            gram.set(i, i, v);
        }
        let weights = cholesky_solve(&gram, &rhs).ok_or(Error::SingularMatrix)?;
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NumericDomain("readout weights are not finite".into()));
        }
        Ok(Readout { weights })
    }
}

/// Fit the readout on rows `washout..` of `states` against `targets`.
pub fn train_readout<T: Real>(states: &Matrix<T>, targets: &[T], ridge: T, washout: usize) -> Result<Readout<T>> {
    if states.rows() != targets.len() {
        return Err(Error::config(
            "targets",
            format!("{} targets for {} state rows", targets.len(), states.rows()),
        ));
    }
    if states.rows() <= washout {
        return Err(Error::config("hyper.washout", "no rows left after washout"));
    }
    if !(ridge >= T::zero()) {
        return Err(Error::config("hyper.ridge", "must be non-negative"));
    }
    let mut trainer = ReadoutTrainer::new(states.cols());
    for k in washout..states.rows() {
        trainer.push(states.row(k), targets[k]);
    }
    trainer.solve(ridge)
}
