//! Measurement function: coordinate masking, sampling at `Δ_s`, and additive
//! measurement noise.

use std::io::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::format;
use crate::scalar::Real;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec<T> {
    /// Observed state indices, in output order.
    pub mask: Vec<usize>,
    /// Sampling interval `Δ_s` (a multiple of the trajectory spacing).
    pub sampling_interval: T,
    /// Noise standard deviation as a fraction of each component's own std.
    #[serde(default)]
    pub measurement_noise: T,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Real> ObservationSpec<T> {
    pub fn new(mask: Vec<usize>, sampling_interval: T) -> Self {
        Self {
            mask,
            sampling_interval,
            measurement_noise: T::zero(),
            seed: 0,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.mask.is_empty() || self.mask.len() > dimension {
            return Err(Error::config("observation.mask", format!("must select 1..={dimension} components")));
        }
        if let Some(&bad) = self.mask.iter().find(|&&i| i >= dimension) {
            return Err(Error::config(
                "observation.mask",
                format!("index {bad} out of range for a {dimension}-dimensional system"),
            ));
        }
        let mut sorted = self.mask.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.mask.len() {
            return Err(Error::config("observation.mask", "duplicate index"));
        }
        if !(self.sampling_interval > T::zero()) {
            return Err(Error::config("observation.sampling_interval", "must be positive"));
        }
        if !(self.measurement_noise >= T::zero()) {
            return Err(Error::config("observation.measurement_noise", "must be non-negative"));
        }
        Ok(())
    }
}

/// Observed samples `y_k ∈ R^{D′}` at times `t0 + k·interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries<T> {
    pub dimension: usize,
    pub interval: T,
    pub t0: T,
    samples: Vec<T>,
}

impl<T: Real> ObservationSeries<T> {
    pub fn from_flat(dimension: usize, interval: T, t0: T, samples: Vec<T>) -> Result<Self> {
        if dimension == 0 || samples.len() % dimension != 0 {
            return Err(Error::config("samples", "length is not a multiple of the dimension"));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericDomain("observation contains non-finite values".into()));
        }
        Ok(Self { dimension, interval, t0, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[T] {
        &self.samples[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize(k).unwrap() * self.interval
    }

    pub fn flat(&self) -> &[T] {
        &self.samples
    }

    /// Samples `range` as a new series starting at the first sample's time.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dimension: self.dimension,
            interval: self.interval,
            t0: self.time(start),
            samples: self.samples[start * self.dimension..end * self.dimension].to_vec(),
        }
    }

    /// Append samples of `other` (timestamps continue this series' grid).
    pub fn extend_from(&mut self, other: &Self, start: usize, end: usize) {
        debug_assert_eq!(self.dimension, other.dimension);
        self.samples
            .extend_from_slice(&other.samples[start * other.dimension..end * other.dimension]);
    }

    /// Keep only `channels`, in that order.
    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.dimension) {
            return Err(Error::config(
                "observation.mask",
                format!("channel {bad} out of range for {} channels", self.dimension),
            ));
        }
        let mut samples = Vec::with_capacity(self.len() * channels.len());
        for k in 0..self.len() {
            let s = self.sample(k);
            samples.extend(channels.iter().map(|&c| s[c]));
        }
        Ok(Self {
            dimension: channels.len(),
            interval: self.interval,
            t0: self.t0,
            samples,
        })
    }

    pub fn empty(dimension: usize, interval: T, t0: T) -> Self {
        Self {
            dimension,
            interval,
            t0,
            samples: Vec::new(),
        }
    }

    /// Per-channel mean and population standard deviation.
    pub fn channel_stats(&self) -> (Vec<T>, Vec<T>) {
        let n = T::from_usize(self.len().max(1)).unwrap();
        let mut mean = vec![T::zero(); self.dimension];
        for k in 0..self.len() {
            for (m, &v) in mean.iter_mut().zip(self.sample(k)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); self.dimension];
        for k in 0..self.len() {
            for ((s, &v), &m) in var.iter_mut().zip(self.sample(k)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
    }

    /// CSV with header `t,<names…>`.
    pub fn write_csv(&self, w: &mut impl Write, names: &[&str]) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        format::write_row(w, &header)?;
        for k in 0..self.len() {
            let mut row = vec![format::num(self.time(k).as_f64())];
            row.extend(self.sample(k).iter().map(|v| format::num(v.as_f64())));
            format::write_row(w, &row)?;
        }
        Ok(())
    }
}

fn stride<T: Real>(interval: T, spacing: T) -> Result<usize> {
    let ratio = (interval / spacing).as_f64();
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n {
        return Err(Error::config(
            "observation.sampling_interval",
            format!("{interval} is not a positive multiple of the trajectory spacing {spacing}"),
        ));
    }
    Ok(n as usize)
}

/// Indices of the trajectory states that fall on the sampling grid.
pub fn sample_indices<T: Real>(traj: &Trajectory<T>, interval: T) -> Result<impl Iterator<Item = usize>> {
    let k = stride(interval, traj.spacing)?;
    Ok((1..=traj.len() / k).map(move |j| j * k - 1))
}

/// Tracked-parameter value at each sampling instant.
pub fn sampled_parameter<T: Real>(traj: &Trajectory<T>, interval: T) -> Result<Vec<T>> {
    Ok(sample_indices(traj, interval)?.map(|i| traj.param_trace[i]).collect())
}

/// Apply the measurement function to a trajectory.
///
/// Noise for component `j` at sample `k` is drawn for every state component
/// regardless of the mask, so different masks over the same trajectory and
/// seed see identical noise on shared components.
pub fn observe<T: Real>(traj: &Trajectory<T>, spec: &ObservationSpec<T>) -> Result<ObservationSeries<T>> {
    spec.validate(traj.dimension)?;
    let idx: Vec<usize> = sample_indices(traj, spec.sampling_interval)?.collect();
    if idx.is_empty() {
        return Err(Error::config(
            "observation.sampling_interval",
            "trajectory is shorter than one sampling interval",
        ));
    }
    let d = spec.mask.len();
    let mut samples = Vec::with_capacity(idx.len() * d);
    for &i in &idx {
        let state = traj.state(i);
        samples.extend(spec.mask.iter().map(|&j| state[j]));
    }
    let t0 = traj.time(idx[0]);
    let mut series = ObservationSeries::from_flat(d, spec.sampling_interval, t0, samples)?;
    if spec.measurement_noise > T::zero() {
        let (_, std) = series.channel_stats();
        let mut rng = seed::rng(seed::derive(spec.seed, "measurement-noise"));
        let full = traj.dimension;
        let mut draws = vec![T::zero(); full];
        for k in 0..series.len() {
            for z in draws.iter_mut() {
                *z = T::lit(rng.sample::<f64, _>(StandardNormal));
            }
            for (c, &j) in spec.mask.iter().enumerate() {
                series.samples[k * d + c] += spec.measurement_noise * std[c] * draws[j];
            }
        }
    }
    Ok(series)
}

/// All non-empty subsets of `{0..D−1}`, by size then lexicographically.
pub fn enumerate_masks(dimension: usize) -> Vec<Vec<usize>> {
    let mut masks: Vec<Vec<usize>> = (1u32..(1 << dimension))
        .map(|bits| (0..dimension).filter(|&i| bits & (1 << i) != 0).collect())
        .collect();
    masks.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    masks
}
