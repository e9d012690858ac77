//! Right-hand sides of the benchmark systems.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

fn lookup<T: Real>(params: &BTreeMap<String, T>, name: &str) -> Result<T> {
    let v = *params
        .get(name)
        .ok_or_else(|| Error::config(format!("params.{name}"), "missing parameter"))?;
    if !v.is_finite() {
        return Err(Error::NumericDomain(format!("parameter {name} is not finite")));
    }
    Ok(v)
}

fn check_state<T: Real>(state: &[T]) -> Result<()> {
    if state.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericDomain("state has non-finite components".into()))
    }
}

/// Three-species resource/consumer/predator food chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoodChainParams<T> {
    pub k: T,
    pub x_c: T,
    pub y_c: T,
    pub x_p: T,
    pub y_p: T,
    pub r_0: T,
    pub c_0: T,
}

impl<T: Real> FoodChainParams<T> {
    pub const NAMES: [&'static str; 7] = ["K", "x_c", "y_c", "x_p", "y_p", "R_0", "C_0"];

    /// Nominal constants: K = 0.94, y_c = 1.7, y_p = 5.0 and the fixed
    /// bioenergetic values x_c = 0.4, x_p = 0.08, R_0 = 0.16129, C_0 = 0.5.
    pub fn nominal() -> Self {
        Self {
            k: T::lit(0.94),
            x_c: T::lit(0.4),
            y_c: T::lit(1.7),
            x_p: T::lit(0.08),
            y_p: T::lit(5.0),
            r_0: T::lit(0.16129),
            c_0: T::lit(0.5),
        }
    }

    pub fn from_map(params: &BTreeMap<String, T>) -> Result<Self> {
        let p = Self {
            k: lookup(params, "K")?,
            x_c: lookup(params, "x_c")?,
            y_c: lookup(params, "y_c")?,
            x_p: lookup(params, "x_p")?,
            y_p: lookup(params, "y_p")?,
            r_0: lookup(params, "R_0")?,
            c_0: lookup(params, "C_0")?,
        };
        for (name, v) in Self::NAMES.iter().zip(p.values()) {
            if !(v > T::zero()) {
                return Err(Error::config(format!("params.{name}"), "food-chain constants must be positive"));
            }
        }
        Ok(p)
    }

    pub fn to_map(&self) -> BTreeMap<String, T> {
        Self::NAMES.iter().map(|n| n.to_string()).zip(self.values()).collect()
    }

    fn values(&self) -> [T; 7] {
        [self.k, self.x_c, self.y_c, self.x_p, self.y_p, self.r_0, self.c_0]
    }

    pub fn slot(name: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == name)
    }

    pub fn set(&mut self, slot: usize, v: T) {
        match slot {
            0 => self.k = v,
            1 => self.x_c = v,
            2 => self.y_c = v,
            3 => self.x_p = v,
            4 => self.y_p = v,
            5 => self.r_0 = v,
            _ => self.c_0 = v,
        }
    }

    #[inline]
    pub fn deriv(&self, s: &[T; 3]) -> [T; 3] {
        let [r, c, p] = *s;
        let one = T::one();
        let r_sat = r / (r + self.r_0);
        let c_sat = c / (c + self.c_0);
        [
            r * (one - r / self.k) - self.x_c * self.y_c * c * r_sat,
            self.x_c * c * (self.y_c * r_sat - one) - self.x_p * self.y_p * p * c_sat,
            self.x_p * p * (self.y_p * c_sat - one),
        ]
    }
}

/// Food-chain right-hand side `(dR/dt, dC/dt, dP/dt)` from a named-parameter map.
pub fn foodchain_deriv<T: Real>(state: &[T; 3], params: &BTreeMap<String, T>) -> Result<[T; 3]> {
    check_state(state)?;
    Ok(FoodChainParams::from_map(params)?.deriv(state))
}

/// Rössler oscillator `dx = −y − z, dy = x + a·y, dz = b + z·(x − c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RosslerParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> RosslerParams<T> {
    pub const NAMES: [&'static str; 3] = ["a", "b", "c"];

    pub fn nominal() -> Self {
        Self {
            a: T::lit(0.2),
            b: T::lit(0.2),
            c: T::lit(5.7),
        }
    }

    pub fn from_map(params: &BTreeMap<String, T>) -> Result<Self> {
        Ok(Self {
            a: lookup(params, "a")?,
            b: lookup(params, "b")?,
            c: lookup(params, "c")?,
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, T> {
        Self::NAMES.iter().map(|n| n.to_string()).zip([self.a, self.b, self.c]).collect()
    }

    pub fn slot(name: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == name)
    }

    pub fn set(&mut self, slot: usize, v: T) {
        match slot {
            0 => self.a = v,
            1 => self.b = v,
            _ => self.c = v,
        }
    }

    #[inline]
    pub fn deriv(&self, s: &[T; 3]) -> [T; 3] {
        let [x, y, z] = *s;
        [-y - z, x + self.a * y, self.b + z * (x - self.c)]
    }
}

pub fn rossler_deriv<T: Real>(state: &[T; 3], params: &BTreeMap<String, T>) -> Result<[T; 3]> {
    check_state(state)?;
    Ok(RosslerParams::from_map(params)?.deriv(state))
}

/// Mackey–Glass `dx/dt = β·x(t−τ)/(1 + x(t−τ)^n) − γ·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MackeyGlassParams<T> {
    pub beta: T,
    pub gamma: T,
    pub n: T,
    pub tau: T,
}

impl<T: Real> MackeyGlassParams<T> {
    pub const NAMES: [&'static str; 4] = ["beta", "gamma", "n", "tau"];

    pub fn nominal() -> Self {
        Self {
            beta: T::lit(0.2),
            gamma: T::lit(0.1),
            n: T::lit(10.0),
            tau: T::lit(17.0),
        }
    }

    pub fn from_map(params: &BTreeMap<String, T>) -> Result<Self> {
        let p = Self {
            beta: lookup(params, "beta")?,
            gamma: lookup(params, "gamma")?,
            n: lookup(params, "n")?,
            tau: lookup(params, "tau")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > T::zero()) {
            return Err(Error::config("params.n", "exponent must be positive"));
        }
        if self.gamma < T::zero() {
            return Err(Error::config("params.gamma", "decay rate must be non-negative"));
        }
        if self.tau < T::zero() {
            return Err(Error::config("params.tau", "delay must be non-negative"));
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<String, T> {
        Self::NAMES
            .iter()
            .map(|n| n.to_string())
            .zip([self.beta, self.gamma, self.n, self.tau])
            .collect()
    }

    pub fn slot(name: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == name)
    }

    pub fn set(&mut self, slot: usize, v: T) {
        match slot {
            0 => self.beta = v,
            1 => self.gamma = v,
            2 => self.n = v,
            _ => self.tau = v,
        }
    }

    #[inline]
    pub fn deriv(&self, x_now: T, x_delayed: T) -> T {
        // x^n via exp/ln would fail for negative x; powf handles integer n.
        self.beta * x_delayed / (T::one() + x_delayed.abs().powf(self.n)) - self.gamma * x_now
    }
}

pub fn mackeyglass_deriv<T: Real>(x_now: T, x_delayed: T, params: &BTreeMap<String, T>) -> Result<T> {
    check_state(&[x_now, x_delayed])?;
    Ok(MackeyGlassParams::from_map(params)?.deriv(x_now, x_delayed))
}
