use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{initial_state, ReservoirHyperparams, ReservoirMatrices, Readout, Runner};
use crate::error::{Error, Result};
use crate::observation::ObservationSeries;
use crate::scalar::Real;
use crate::seed;

/// How the post-training output correction is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Gain and offset from two reference levels.
    #[default]
    Affine,
    /// Unit gain; the offset removes the mean bias of the two references.
    OffsetOnly,
    /// Identity correction.
    None,
}

/// Affine output correction `o ↦ gain·o + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    pub gain: T,
    pub offset: T,
}

impl<T: Real> Calibration<T> {
    pub fn identity() -> Self {
        Self {
            gain: T::one(),
            offset: T::zero(),
        }
    }

    #[inline]
    pub fn apply(&self, raw: T) -> T {
        self.gain * raw + self.offset
    }

    /// Fit from two `(true value, mean raw output)` pairs.
    pub fn fit(pairs: &[(T, T); 2], mode: CalibrationMode) -> Result<Self> {
        let [(p1, o1), (p2, o2)] = *pairs;
        if ![p1, o1, p2, o2].iter().all(|v| v.is_finite()) {
            return Err(Error::Calibration("non-finite calibration pair".into()));
        }
        match mode {
            CalibrationMode::None => Ok(Self::identity()),
            CalibrationMode::OffsetOnly => Ok(Self {
                gain: T::one(),
                offset: T::lit(0.5) * ((p1 - o1) + (p2 - o2)),
            }),
            CalibrationMode::Affine => {
                if p1 == p2 {
                    return Err(Error::Calibration("reference parameter values coincide".into()));
                }
                if o1 == o2 {
                    return Err(Error::Calibration("reference outputs coincide".into()));
                }
                let gain = (p2 - p1) / (o2 - o1);
                Ok(Self {
                    gain,
                    offset: p1 - gain * o1,
                })
            }
        }
    }
}

/// Per-channel z-score normalization frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> InputScaler<T> {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            std: vec![T::one(); channels],
        }
    }

    pub fn from_series(series: &ObservationSeries<T>) -> Self {
        let (mean, std) = series.channel_stats();
        let std = std
            .into_iter()
            .map(|s| if s > T::zero() && s.is_finite() { s } else { T::one() })
            .collect();
        Self { mean, std }
    }

    #[inline]
    pub fn apply(&self, y: &[T], out: &mut [T]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(y).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }
}

/// A trained, calibrated parameter tracker. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedTracker<T> {
    pub matrices: ReservoirMatrices<T>,
    pub readout: Readout<T>,
    pub calibration: Calibration<T>,
    pub hyper: ReservoirHyperparams<T>,
    pub input_stats: InputScaler<T>,
    /// Observation mask the tracker was trained on.
    pub mask: Vec<usize>,
}

impl<T: Real> TrainedTracker<T> {
    fn check_series(&self, series: &ObservationSeries<T>) -> Result<()> {
        if series.dimension != self.matrices.input_dim() {
            return Err(Error::config(
                "observation.mask",
                format!(
                    "series has {} channels, tracker was trained on {}",
                    series.dimension,
                    self.matrices.input_dim()
                ),
            ));
        }
        Ok(())
    }

    /// Uncalibrated readout for every sample, starting from a fresh random
    /// reservoir state.
    pub fn raw_outputs(&self, series: &ObservationSeries<T>) -> Result<Vec<T>> {
        self.check_series(series)?;
        let init = initial_state(self.matrices.size(), seed::derive(self.matrices.seed, "track-initial-state"));
        let mut runner = Runner::new(&self.matrices, self.hyper.leakage, &self.input_stats, init)?;
        let mut out = Vec::with_capacity(series.len());
        for k in 0..series.len() {
            let r = runner.step(series.sample(k))?;
            out.push(self.readout.apply(r));
        }
        Ok(out)
    }

    pub fn with_calibration(mut self, calibration: Calibration<T>) -> Self {
        self.calibration = calibration;
        self
    }

    /// SHA-256 of the serialized bundle, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::new();
        super::write_bundle(self, &mut bytes).expect("in-memory write");
        hex(&Sha256::digest(&bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Calibrated tracker output `o(t)` for every sample of `series`. The first
/// `hyper.washout` values are reservoir warm-up.
pub fn track<T: Real>(tracker: &TrainedTracker<T>, series: &ObservationSeries<T>) -> Result<Vec<T>> {
    let mut out = tracker.raw_outputs(series)?;
    out.iter_mut().for_each(|o| *o = tracker.calibration.apply(*o));
    Ok(out)
}

/// Fit a new calibration from two `(true value, mean raw output)` pairs and
/// return the re-calibrated tracker.
pub fn calibrate<T: Real>(
    tracker: &TrainedTracker<T>,
    pairs: &[(T, T); 2],
    mode: CalibrationMode,
) -> Result<TrainedTracker<T>> {
    let c = Calibration::fit(pairs, mode)?;
    if c.gain == T::zero() || !c.gain.is_finite() {
        return Err(Error::Calibration("calibration gain is zero or non-finite".into()));
    }
    Ok(tracker.clone().with_calibration(c))
}
