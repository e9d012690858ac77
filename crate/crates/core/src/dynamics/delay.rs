use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ring buffer of past samples on a uniform grid of spacing `dt`, with linear
/// interpolation between grid points.
#[derive(Debug, Clone)]
pub struct DelayBuffer<T> {
    values: Vec<T>,
    /// Index of the most recent sample.
    head: usize,
}

impl<T: Real> DelayBuffer<T> {
    /// Buffer able to look back `max_delay` time units, pre-filled with a
    /// constant history.
    pub fn new(max_delay: T, dt: T, history: T) -> Result<Self> {
        if !(dt > T::zero()) || !(max_delay >= dt) {
            return Err(Error::config("tau", "delay must be at least dt"));
        }
        let lags = snap(max_delay / dt)
            .ceil()
            .to_usize()
            .ok_or_else(|| Error::config("tau", "delay too large"))?;
        Ok(Self {
            values: vec![history; lags + 2],
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.values.len()
    }

    pub fn push(&mut self, x: T) {
        self.head = (self.head + 1) % self.values.len();
        self.values[self.head] = x;
    }

    pub fn latest(&self) -> T {
        self.values[self.head]
    }

    #[inline]
    fn back(&self, k: usize) -> T {
        let n = self.values.len();
        debug_assert!(k < n);
        self.values[(self.head + n - k) % n]
    }

    /// Value `lag` grid steps before the latest sample (fractional lags are
    /// interpolated linearly).
    #[inline]
    pub fn lookup(&self, lag: T) -> T {
        let whole = lag.floor();
        let frac = lag - whole;
        let k = whole.to_usize().unwrap_or(0);
        if frac == T::zero() {
            return self.back(k);
        }
        let newer = self.back(k);
        let older = self.back(k + 1);
        newer + frac * (older - newer)
    }
}

/// Round `x` to the nearest integer when it is within relative 1e-9 of it, so
/// delays that are whole multiples of `dt` hit stored samples exactly.
#[inline]
pub fn snap<T: Real>(x: T) -> T {
    let r = x.round();
    if (x - r).abs() <= T::lit(1e-9) * r.abs().max(T::one()) {
        r
    } else {
        x
    }
}
