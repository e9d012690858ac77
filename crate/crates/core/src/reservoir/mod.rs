//! Echo-state reservoir computer with a scalar linear readout.
//!
//! State update for normalized input `ŷ`:
//!
//! ```text
//! r(t+1) = (1 − α)·r(t) + α·tanh(W_r·r(t) + W_in·ŷ(t+1) + b)
//! ```
//!
//! The readout acts on the augmented state `[r; 1]`.

mod bundle;
mod readout;
mod tracker;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use bundle::{read_bundle, write_bundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use readout::{train_readout, Readout, ReadoutTrainer};
pub(crate) use tracker::hex;
pub use tracker::{calibrate, track, Calibration, CalibrationMode, InputScaler, TrainedTracker};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, CsrMatrix, Matrix};
use crate::observation::ObservationSeries;
use crate::scalar::Real;
use crate::seed;

pub const POWER_ITERATIONS: usize = 4000;
pub const MAX_INIT_RETRIES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirHyperparams<T> {
    /// Number of reservoir units `D_r`.
    pub size: usize,
    pub spectral_radius: T,
    pub input_scaling: T,
    /// Leak rate `α ∈ (0, 1]`.
    pub leakage: T,
    /// Fraction of nonzero recurrent weights.
    pub density: T,
    pub bias_scaling: T,
    /// Ridge penalty `β_reg`.
    pub ridge: T,
    /// Leading samples excluded from training and scoring.
    pub washout: usize,
}

impl<T: Real> Default for ReservoirHyperparams<T> {
    fn default() -> Self {
        Self {
            size: 500,
            spectral_radius: T::lit(0.9),
            input_scaling: T::lit(0.5),
            leakage: T::lit(0.3),
            density: T::lit(0.02),
            bias_scaling: T::lit(0.5),
            ridge: T::lit(1e-6),
            washout: 100,
        }
    }
}

impl<T: Real> ReservoirHyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::config(format!("hyper.{field}"), why.to_string()));
        if self.size == 0 {
            return bad("size", "must be at least 1");
        }
        if !(self.spectral_radius >= T::zero()) {
            return bad("spectral_radius", "must be non-negative");
        }
        if !(self.input_scaling > T::zero()) {
            return bad("input_scaling", "must be positive");
        }
        if !(self.leakage > T::zero() && self.leakage <= T::one()) {
            return bad("leakage", "must lie in (0, 1]");
        }
        if !(self.density > T::zero() && self.density <= T::one()) {
            return bad("density", "must lie in (0, 1]");
        }
        if !(self.bias_scaling >= T::zero()) {
            return bad("bias_scaling", "must be non-negative");
        }
        if !(self.ridge >= T::zero()) {
            return bad("ridge", "must be non-negative");
        }
        Ok(())
    }
}

/// Fixed random weights of one reservoir realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMatrices<T> {
    pub recurrent: CsrMatrix<T>,
    /// `D_r × D′` input weights.
    pub input: Matrix<T>,
    pub bias: Vec<T>,
    pub seed: u64,
}

impl<T: Real> ReservoirMatrices<T> {
    pub fn size(&self) -> usize {
        self.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input.cols()
    }
}

fn random_recurrent<T: Real>(n: usize, density: f64, seed: u64) -> CsrMatrix<T> {
    let mut rng = seed::rng(seed);
    let mut triplets = Vec::with_capacity((n as f64 * n as f64 * density * 1.1) as usize + 16);
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                triplets.push((i, j, T::lit(rng.random_range(-1.0..=1.0))));
            }
        }
    }
    CsrMatrix::from_sorted_triplets(n, n, &triplets)
}

/// Draw a reservoir: sparse recurrent weights rescaled to the target spectral
/// radius, dense input weights on `[−σ_in, σ_in]`, and one bias channel on
/// `[−σ_b, σ_b]`.
pub fn init_reservoir<T: Real>(
    hyper: &ReservoirHyperparams<T>,
    input_dim: usize,
    seed: u64,
) -> Result<ReservoirMatrices<T>> {
    hyper.validate()?;
    if input_dim == 0 {
        return Err(Error::config("observation.mask", "reservoir needs at least one input channel"));
    }
    let n = hyper.size;
    let density = hyper.density.as_f64();
    let mut recurrent = None;
    for attempt in 0..=MAX_INIT_RETRIES {
        let sub = seed::derive_indexed(seed, "recurrent", attempt as u64);
        let mut w = random_recurrent::<T>(n, density, sub);
        if hyper.spectral_radius == T::zero() {
            w.scale(T::zero());
            w.prune_zeros();
            recurrent = Some(w);
            break;
        }
        let start = uniform_vector(n, T::one(), seed::derive(sub, "power-start"));
        if let Some(est) = spectral_radius(&w, POWER_ITERATIONS, &start) {
            w.scale(hyper.spectral_radius / est);
            recurrent = Some(w);
            break;
        }
    }
    let recurrent = recurrent.ok_or(Error::PowerIteration { retries: MAX_INIT_RETRIES })?;

    let mut rng = seed::rng(seed::derive(seed, "input"));
    let s_in = hyper.input_scaling.as_f64();
    let input = Matrix::from_vec(
        n,
        input_dim,
        (0..n * input_dim).map(|_| T::lit(rng.random_range(-s_in..=s_in))).collect(),
    );
    let bias = uniform_vector(n, hyper.bias_scaling, seed::derive(seed, "bias"));
    Ok(ReservoirMatrices {
        recurrent,
        input,
        bias,
        seed,
    })
}

fn uniform_vector<T: Real>(n: usize, half_width: T, seed: u64) -> Vec<T> {
    let mut rng = seed::rng(seed);
    let h = half_width.as_f64();
    (0..n)
        .map(|_| if h > 0.0 { T::lit(rng.random_range(-h..=h)) } else { T::zero() })
        .collect()
}

/// Random initial reservoir state, uniform on `[−1, 1]^{D_r}`.
pub fn initial_state<T: Real>(size: usize, seed: u64) -> Vec<T> {
    uniform_vector(size, T::one(), seed)
}

/// Stepwise reservoir evolution.
#[derive(Debug, Clone)]
pub struct Runner<'a, T> {
    matrices: &'a ReservoirMatrices<T>,
    leakage: T,
    scaler: &'a InputScaler<T>,
    state: Vec<T>,
    pre: Vec<T>,
    normalized: Vec<T>,
    steps: usize,
}

impl<'a, T: Real> Runner<'a, T> {
    pub fn new(
        matrices: &'a ReservoirMatrices<T>,
        leakage: T,
        scaler: &'a InputScaler<T>,
        initial: Vec<T>,
    ) -> Result<Self> {
        if initial.len() != matrices.size() {
            return Err(Error::config("initial_state", "length differs from reservoir size"));
        }
        if scaler.mean.len() != matrices.input_dim() {
            return Err(Error::config("input_stats", "channel count differs from input weights"));
        }
        Ok(Self {
            matrices,
            leakage,
            scaler,
            state: initial,
            pre: vec![T::zero(); matrices.size()],
            normalized: vec![T::zero(); matrices.input_dim()],
            steps: 0,
        })
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    /// Advance one step with raw observation `y` and return the new state.
    #[inline]
    pub fn step(&mut self, y: &[T]) -> Result<&[T]> {
        self.scaler.apply(y, &mut self.normalized);
        let m = self.matrices;
        m.recurrent.matvec_into(&self.state, &mut self.pre);
        let d_in = self.normalized.len();
        let alpha = self.leakage;
        let keep = T::one() - alpha;
        let w_in = m.input.as_slice();
        let mut finite = true;
        for (i, (r, &p)) in self.state.iter_mut().zip(&self.pre).enumerate() {
            let drive: T = w_in[i * d_in..(i + 1) * d_in]
                .iter()
                .zip(&self.normalized)
                .map(|(&w, &u)| w * u)
                .sum();
            *r = keep * *r + alpha * (p + drive + m.bias[i]).tanh();
            finite &= r.is_finite();
        }
        self.steps += 1;
        if !finite {
            return Err(Error::NonFiniteState { step: self.steps - 1 });
        }
        Ok(&self.state)
    }
}

/// Reservoir states for every sample of `series`, one row per sample.
/// Rows `0..hyper.washout` are the washout and are skipped by training.
pub fn drive<T: Real>(
    matrices: &ReservoirMatrices<T>,
    hyper: &ReservoirHyperparams<T>,
    scaler: &InputScaler<T>,
    series: &ObservationSeries<T>,
    initial: Vec<T>,
) -> Result<Matrix<T>> {
    if series.dimension != matrices.input_dim() {
        return Err(Error::config(
            "observation.mask",
            format!(
                "series has {} channels, reservoir expects {}",
                series.dimension,
                matrices.input_dim()
            ),
        ));
    }
    let mut runner = Runner::new(matrices, hyper.leakage, scaler, initial)?;
    let n = matrices.size();
    let mut out = Matrix::zeros(series.len(), n);
    for k in 0..series.len() {
        let s = runner.step(series.sample(k))?;
        out.row_mut(k).copy_from_slice(s);
    }
    Ok(out)
}
