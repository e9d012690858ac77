//! Parameter-versus-time signals.
//!
//! A [`WaveformSpec`] is the serializable description; [`WaveformSpec::compile`]
//! validates it once and yields a [`Signal`] that is cheap to evaluate inside
//! the integrator loop.
//!
//! Closed forms, with `p̄` the base value, `A` the amplitude, `T_c` the carrier
//! period, `T_m` the modulation period and `m` the modulation depth:
//!
//! ```text
//! FM:       p̄ + A·sin(2πt/T_c + m·(T_c/T_m)·sin(2πt/T_m))
//! AM:       p̄ + A·(1 + m·sin(2πt/T_m))·sin(2πt/T_c)
//! Sawtooth: p̄ + A·(2·frac(t/T_c) − 1)
//! ```

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Constant,
    PiecewiseConstant,
    Fm,
    Am,
    Sawtooth,
}

impl WaveformKind {
    pub fn label(self) -> &'static str {
        match self {
            WaveformKind::Constant => "constant",
            WaveformKind::PiecewiseConstant => "piecewise_constant",
            WaveformKind::Fm => "fm",
            WaveformKind::Am => "am",
            WaveformKind::Sawtooth => "sawtooth",
        }
    }
}

/// One `(value, duration)` step of a piecewise-constant schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub value: T,
    pub duration: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec<T> {
    pub kind: WaveformKind,
    /// Nominal parameter value `p̄`.
    pub base: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_period: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation_period: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation_depth: Option<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<Segment<T>>,
}

impl<T: Real> WaveformSpec<T> {
    pub fn constant(base: T) -> Self {
        Self {
            kind: WaveformKind::Constant,
            base,
            amplitude: None,
            carrier_period: None,
            modulation_period: None,
            modulation_depth: None,
            schedule: Vec::new(),
        }
    }

    pub fn fm(base: T, amplitude: T, carrier_period: T, modulation_period: T, depth: T) -> Self {
        Self {
            kind: WaveformKind::Fm,
            amplitude: Some(amplitude),
            carrier_period: Some(carrier_period),
            modulation_period: Some(modulation_period),
            modulation_depth: Some(depth),
            ..Self::constant(base)
        }
    }

    pub fn am(base: T, amplitude: T, carrier_period: T, modulation_period: T, depth: T) -> Self {
        Self {
            kind: WaveformKind::Am,
            ..Self::fm(base, amplitude, carrier_period, modulation_period, depth)
        }
    }

    pub fn sawtooth(base: T, amplitude: T, period: T) -> Self {
        Self {
            kind: WaveformKind::Sawtooth,
            amplitude: Some(amplitude),
            carrier_period: Some(period),
            ..Self::constant(base)
        }
    }

    pub fn piecewise(schedule: Vec<Segment<T>>) -> Self {
        let base = schedule.first().map(|s| s.value).unwrap_or_else(T::zero);
        Self {
            kind: WaveformKind::PiecewiseConstant,
            schedule,
            ..Self::constant(base)
        }
    }

    /// The test waveform of `kind` with the default timescales for a given
    /// switching interval: `T_c = 250·ΔT_s`, `T_m = 4·T_c`, `m = 0.5`.
    /// `amplitude` is the peak excursion for every kind, so the AM carrier
    /// amplitude is scaled down by `1 + m` and all three waveforms sweep the
    /// same parameter range.
    pub fn test_default(kind: WaveformKind, base: T, amplitude: T, switching_interval: T) -> Self {
        let tc = T::lit(250.0) * switching_interval;
        let tm = T::lit(4.0) * tc;
        let m = T::lit(0.5);
        match kind {
            WaveformKind::Fm => Self::fm(base, amplitude, tc, tm, m),
            WaveformKind::Am => Self::am(base, amplitude / (T::one() + m), tc, tm, m),
            WaveformKind::Sawtooth => Self::sawtooth(base, amplitude, tc),
            WaveformKind::Constant | WaveformKind::PiecewiseConstant => Self::constant(base),
        }
    }

    /// Validate and lower into an evaluable signal.
    pub fn compile(&self) -> Result<Signal<T>> {
        let need = |v: Option<T>, name: &str| -> Result<T> {
            v.ok_or_else(|| Error::config(name, format!("required for {} waveform", self.kind.label())))
        };
        let positive = |v: T, name: &str| -> Result<T> {
            if v > T::zero() && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(name, "must be positive"))
            }
        };
        if !self.base.is_finite() {
            return Err(Error::config("base", "must be finite"));
        }
        Ok(match self.kind {
            WaveformKind::Constant => Signal::Constant(self.base),
            WaveformKind::PiecewiseConstant => {
                if self.schedule.is_empty() {
                    return Err(Error::config("schedule", "must be non-empty"));
                }
                let mut ends = Vec::with_capacity(self.schedule.len());
                let mut acc = T::zero();
                for (i, seg) in self.schedule.iter().enumerate() {
                    positive(seg.duration, &format!("schedule[{i}].duration"))?;
                    acc += seg.duration;
                    ends.push(acc);
                }
                Signal::Piecewise {
                    values: self.schedule.iter().map(|s| s.value).collect(),
                    ends,
                }
            }
            WaveformKind::Fm | WaveformKind::Am => {
                let amplitude = need(self.amplitude, "amplitude")?;
                let tc = positive(need(self.carrier_period, "carrier_period")?, "carrier_period")?;
                let tm = positive(need(self.modulation_period, "modulation_period")?, "modulation_period")?;
                let m = need(self.modulation_depth, "modulation_depth")?;
                if !(m >= T::zero() && m < T::one()) {
                    return Err(Error::config("modulation_depth", "must lie in [0, 1)"));
                }
                if self.kind == WaveformKind::Fm {
                    Signal::Fm { base: self.base, amplitude, tc, tm, m }
                } else {
                    Signal::Am { base: self.base, amplitude, tc, tm, m }
                }
            }
            WaveformKind::Sawtooth => Signal::Sawtooth {
                base: self.base,
                amplitude: need(self.amplitude, "amplitude")?,
                period: positive(need(self.carrier_period, "carrier_period")?, "carrier_period")?,
            },
        })
    }

    /// Evaluate at a single time. Prefer [`compile`](Self::compile) in loops.
    pub fn evaluate(&self, t: T) -> Result<T> {
        if t < T::zero() {
            return Err(Error::config("t", "must be non-negative"));
        }
        Ok(self.compile()?.at(t))
    }
}

/// Validated waveform, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal<T> {
    Constant(T),
    Piecewise { values: Vec<T>, ends: Vec<T> },
    Fm { base: T, amplitude: T, tc: T, tm: T, m: T },
    Am { base: T, amplitude: T, tc: T, tm: T, m: T },
    Sawtooth { base: T, amplitude: T, period: T },
}

impl<T: Real> Signal<T> {
    #[inline]
    pub fn at(&self, t: T) -> T {
        let two_pi = T::lit(std::f64::consts::TAU);
        match *self {
            Signal::Constant(v) => v,
            Signal::Piecewise { ref values, ref ends } => {
                // Segment i covers [ends[i-1], ends[i]); hold the last value past the end.
                let idx = ends.partition_point(|&e| e <= t);
                values[idx.min(values.len() - 1)]
            }
            Signal::Fm { base, amplitude, tc, tm, m } => {
                let phase = two_pi * t / tc + m * (tc / tm) * (two_pi * t / tm).sin();
                base + amplitude * phase.sin()
            }
            Signal::Am { base, amplitude, tc, tm, m } => {
                base + amplitude * (T::one() + m * (two_pi * t / tm).sin()) * (two_pi * t / tc).sin()
            }
            Signal::Sawtooth { base, amplitude, period } => {
                let x = t / period;
                base + amplitude * (T::lit(2.0) * (x - x.floor()) - T::one())
            }
        }
    }

    /// Bound on `|p(t) − p̄|`; for piecewise and constant signals this is
    /// measured around the first value.
    pub fn peak_excursion(&self) -> T {
        match *self {
            Signal::Constant(_) => T::zero(),
            Signal::Piecewise { ref values, .. } => {
                values.iter().map(|&v| (v - values[0]).abs()).fold(T::zero(), T::max)
            }
            Signal::Fm { amplitude, .. } | Signal::Sawtooth { amplitude, .. } => amplitude.abs(),
            Signal::Am { amplitude, m, .. } => amplitude.abs() * (T::one() + m),
        }
    }

    /// Upper bound on the signal value over all `t ≥ 0`.
    pub fn max_value(&self) -> T {
        match *self {
            Signal::Constant(v) => v,
            Signal::Piecewise { ref values, .. } => values.iter().copied().fold(T::neg_infinity(), T::max),
            Signal::Fm { base, amplitude, .. } | Signal::Sawtooth { base, amplitude, .. } => base + amplitude.abs(),
            Signal::Am { base, amplitude, m, .. } => base + amplitude.abs() * (T::one() + m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Cyclic,
    /// Each consecutive block of `values.len()` segments is a fresh random
    /// permutation of the values.
    #[default]
    Random,
}

/// Number of whole segments of length `interval` in `total`, or an error if
/// `total` is not (to within rounding) a positive multiple of `interval`.
pub fn segment_count<T: Real>(total: T, interval: T, path: &str) -> Result<usize> {
    if !(interval > T::zero()) || !(total > T::zero()) {
        return Err(Error::config(path, "durations must be positive"));
    }
    let ratio = (total / interval).as_f64();
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::config(path, format!("{} is not a positive multiple of {}", total, interval)));
    }
    Ok(n as usize)
}

/// Build the piecewise-constant training schedule: `total/interval` segments
/// of length `interval`, values chosen by `ordering`.
pub fn training_schedule<T: Real>(
    values: &[T],
    interval: T,
    total: T,
    ordering: Ordering,
    seed: u64,
) -> Result<WaveformSpec<T>> {
    if values.is_empty() {
        return Err(Error::config("values", "must be non-empty"));
    }
    let n_segments = segment_count(total, interval, "train_duration")?;
    let order = schedule_order(values.len(), n_segments, ordering, seed);
    let schedule = order
        .into_iter()
        .map(|i| Segment { value: values[i], duration: interval })
        .collect();
    Ok(WaveformSpec::piecewise(schedule))
}

/// Level index of every segment in a schedule of `n_segments` over `n_levels`.
pub fn schedule_order(n_levels: usize, n_segments: usize, ordering: Ordering, seed: u64) -> Vec<usize> {
    match ordering {
        Ordering::Cyclic => (0..n_segments).map(|i| i % n_levels).collect(),
        Ordering::Random => {
            let mut rng = seed::rng(seed);
            let mut out = Vec::with_capacity(n_segments);
            let mut block: Vec<usize> = (0..n_levels).collect();
            while out.len() < n_segments {
                block.shuffle(&mut rng);
                let take = (n_segments - out.len()).min(n_levels);
                out.extend_from_slice(&block[..take]);
            }
            out
        }
    }
}

/// `s_n` training levels equally spaced on `[p̄ − s_w·A, p̄ + s_w·A]`.
pub fn training_values<T: Real>(base: T, amplitude: T, count: usize, width: T) -> Result<Vec<T>> {
    if count == 0 {
        return Err(Error::config("s_n", "must be at least 1"));
    }
    if !(width > T::zero()) {
        return Err(Error::config("s_w", "must be positive"));
    }
    if width > T::one() {
        return Err(Error::config("s_w", "must not exceed 1"));
    }
    if !(amplitude > T::zero()) {
        return Err(Error::config("amplitude", "must be positive"));
    }
    if count == 1 {
        return Ok(vec![base]);
    }
    let half = width * amplitude;
    let denom = T::from_usize(count - 1).unwrap();
    // Integer numerators keep the offsets exactly antisymmetric.
    Ok((0..count)
        .map(|i| {
            let num = T::from_i64(2 * i as i64 - (count as i64 - 1)).unwrap();
            base + half * num / denom
        })
        .collect())
}
