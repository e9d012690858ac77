//! Benchmark dynamical systems and their fixed-step integration.
//!
//! Each system is integrated with classical RK4 at step `dt`. The tracked
//! parameter is read from a [`WaveformSpec`] at the start of every step and
//! held for the duration of that step. Optional dynamical noise is an additive
//! Euler–Maruyama kick `σ·√dt·N(0,1)` applied after each deterministic step.

mod delay;
mod models;
mod rk4;

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use delay::{snap, DelayBuffer};
pub use models::{
    foodchain_deriv, mackeyglass_deriv, rossler_deriv, FoodChainParams, MackeyGlassParams, RosslerParams,
};
pub use rk4::{integrate_fixed, rk4_step};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;
use crate::waveforms::{segment_count, Signal, WaveformSpec};

/// Magnitude above which a trajectory is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Steps integrated and discarded before harvesting data from a random start.
pub const DEFAULT_TRANSIENT_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    FoodChain,
    Rossler,
    MackeyGlass,
}

impl SystemKind {
    pub fn dimension(self) -> usize {
        match self {
            SystemKind::FoodChain | SystemKind::Rossler => 3,
            SystemKind::MackeyGlass => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SystemKind::FoodChain => "foodchain",
            SystemKind::Rossler => "rossler",
            SystemKind::MackeyGlass => "mackeyglass",
        }
    }

    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            SystemKind::FoodChain => &["R", "C", "P"],
            SystemKind::Rossler => &["x", "y", "z"],
            SystemKind::MackeyGlass => &["x"],
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            SystemKind::FoodChain => &FoodChainParams::<f64>::NAMES,
            SystemKind::Rossler => &RosslerParams::<f64>::NAMES,
            SystemKind::MackeyGlass => &MackeyGlassParams::<f64>::NAMES,
        }
    }

    pub fn default_tracked(self) -> &'static str {
        match self {
            SystemKind::FoodChain => "K",
            SystemKind::Rossler => "c",
            SystemKind::MackeyGlass => "tau",
        }
    }

    /// Support of the uniform initial-condition distribution, per component.
    pub fn initial_box(self) -> (f64, f64) {
        match self {
            SystemKind::FoodChain => (0.1, 1.0),
            SystemKind::Rossler => (-1.0, 1.0),
            SystemKind::MackeyGlass => (0.5, 1.5),
        }
    }

    pub fn nominal_params<T: Real>(self) -> BTreeMap<String, T> {
        match self {
            SystemKind::FoodChain => FoodChainParams::nominal().to_map(),
            SystemKind::Rossler => RosslerParams::nominal().to_map(),
            SystemKind::MackeyGlass => MackeyGlassParams::nominal().to_map(),
        }
    }
}

/// A benchmark system with its constants and the identity of the tracked
/// parameter. `fixed_params` holds every constant; the tracked entry is its
/// nominal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec<T> {
    pub name: SystemKind,
    /// Overrides of the nominal constants; missing names take their defaults.
    #[serde(default)]
    pub fixed_params: BTreeMap<String, T>,
    pub tracked_param: String,
    pub dt: T,
}

impl<T: Real> SystemSpec<T> {
    pub fn new(name: SystemKind, tracked: &str) -> Self {
        Self {
            name,
            fixed_params: name.nominal_params(),
            tracked_param: tracked.to_string(),
            dt: T::lit(0.01),
        }
    }

    pub fn foodchain(tracked: &str) -> Self {
        Self::new(SystemKind::FoodChain, tracked)
    }

    pub fn dimension(&self) -> usize {
        self.name.dimension()
    }

    /// All constants, defaults filled in for names that were not given.
    pub fn params(&self) -> BTreeMap<String, T> {
        let mut p = self.name.nominal_params();
        p.extend(self.fixed_params.iter().map(|(k, v)| (k.clone(), *v)));
        p
    }

    pub fn nominal_value(&self) -> T {
        self.params()[self.tracked_param.as_str()]
    }

    /// Delay `τ` (Mackey–Glass only).
    pub fn delay(&self) -> Option<T> {
        (self.name == SystemKind::MackeyGlass).then(|| self.params()["tau"])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::config("system.dt", "must be positive"));
        }
        if let Some(unknown) = self.fixed_params.keys().find(|k| !self.name.param_names().contains(&k.as_str())) {
            return Err(Error::config(
                format!("system.fixed_params.{unknown}"),
                format!("unknown parameter for {}", self.name.label()),
            ));
        }
        if !self.name.param_names().contains(&self.tracked_param.as_str()) {
            return Err(Error::config(
                "system.tracked_param",
                format!("`{}` is not a parameter of {}", self.tracked_param, self.name.label()),
            ));
        }
        let params = self.params();
        match self.name {
            SystemKind::FoodChain => {
                FoodChainParams::from_map(&params)?;
            }
            SystemKind::Rossler => {
                RosslerParams::from_map(&params)?;
            }
            SystemKind::MackeyGlass => {
                let p = MackeyGlassParams::from_map(&params)?;
                if p.tau < self.dt {
                    return Err(Error::config("system.fixed_params.tau", "delay must be at least dt"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub components: Vec<T>,
    pub t: T,
}

impl<T: Real> StateVector<T> {
    pub fn new(components: Vec<T>) -> Self {
        Self { components, t: T::zero() }
    }
}

/// States on a uniform time grid with the tracked-parameter value that was
/// applied during the step producing each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dimension: usize,
    /// Time between consecutive stored states.
    pub spacing: T,
    /// Integrator step used to produce the states.
    pub dt: T,
    /// Time stamp of the first stored state.
    pub t0: T,
    states: Vec<T>,
    pub param_trace: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.param_trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.param_trace.is_empty()
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.states[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + T::from_usize(i).unwrap() * self.spacing
    }

    pub fn states(&self) -> impl Iterator<Item = StateVector<T>> + '_ {
        (0..self.len()).map(|i| StateVector {
            components: self.state(i).to_vec(),
            t: self.time(i),
        })
    }

    pub fn flat_states(&self) -> &[T] {
        &self.states
    }

    pub fn last_state(&self) -> Option<&[T]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions<T> {
    /// Store every `record_every`-th state (1 keeps every step).
    pub record_every: usize,
    /// Standard deviation of the additive dynamical noise.
    pub dynamical_noise: T,
    /// Steps integrated at the initial parameter value and discarded.
    pub transient_steps: usize,
}

impl<T: Real> Default for IntegrateOptions<T> {
    fn default() -> Self {
        Self {
            record_every: 1,
            dynamical_noise: T::zero(),
            transient_steps: 0,
        }
    }
}

/// Deterministic integration storing every step. When `x0` is `None` the
/// start is drawn uniformly from the system's initial-condition box.
pub fn integrate<T: Real>(
    system: &SystemSpec<T>,
    x0: Option<&StateVector<T>>,
    signal: &WaveformSpec<T>,
    duration: T,
    seed: u64,
) -> Result<Trajectory<T>> {
    integrate_with(system, x0, signal, duration, seed, &IntegrateOptions::default())
}

/// [`integrate`] with additive dynamical noise of standard deviation `sigma`.
pub fn add_dynamical_noise<T: Real>(
    system: &SystemSpec<T>,
    x0: Option<&StateVector<T>>,
    signal: &WaveformSpec<T>,
    duration: T,
    sigma: T,
    seed: u64,
) -> Result<Trajectory<T>> {
    let opts = IntegrateOptions {
        dynamical_noise: sigma,
        ..IntegrateOptions::default()
    };
    integrate_with(system, x0, signal, duration, seed, &opts)
}

pub fn integrate_with<T: Real>(
    system: &SystemSpec<T>,
    x0: Option<&StateVector<T>>,
    signal: &WaveformSpec<T>,
    duration: T,
    seed: u64,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    system.validate()?;
    if opts.record_every == 0 {
        return Err(Error::config("record_every", "must be at least 1"));
    }
    if !(opts.dynamical_noise >= T::zero()) {
        return Err(Error::config("dynamical_noise", "must be non-negative"));
    }
    let steps = segment_count(duration, system.dt, "duration")?;
    let signal = signal.compile()?;
    let dim = system.dimension();
    let start = match x0 {
        Some(x) => {
            if x.components.len() != dim {
                return Err(Error::config(
                    "x0",
                    format!("expected {dim} components, got {}", x.components.len()),
                ));
            }
            if !x.components.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericDomain("initial state is not finite".into()));
            }
            x.components.clone()
        }
        None => random_initial_state(system.name, seed),
    };
    let mut run = Run {
        dt: system.dt,
        steps,
        opts,
        signal: &signal,
        noise_rng: seed::rng(seed::derive(seed, "dynamical-noise")),
        out: Trajectory {
            dimension: dim,
            spacing: system.dt * T::from_usize(opts.record_every).unwrap(),
            dt: system.dt,
            t0: system.dt * T::from_usize(opts.record_every).unwrap(),
            states: Vec::with_capacity(steps / opts.record_every * dim),
            param_trace: Vec::with_capacity(steps / opts.record_every),
        },
    };
    let params = system.params();
    let tracked = system.tracked_param.as_str();
    match system.name {
        SystemKind::FoodChain => {
            let p = FoodChainParams::from_map(&params)?;
            let slot = FoodChainParams::<T>::slot(tracked).unwrap();
            run.ode3(p, start, true, |p, v| p.set(slot, v), |p, x| p.deriv(x))?;
        }
        SystemKind::Rossler => {
            let p = RosslerParams::from_map(&params)?;
            let slot = RosslerParams::<T>::slot(tracked).unwrap();
            run.ode3(p, start, false, |p, v| p.set(slot, v), |p, x| p.deriv(x))?;
        }
        SystemKind::MackeyGlass => {
            let p = MackeyGlassParams::from_map(&params)?;
            let slot = MackeyGlassParams::<T>::slot(tracked).unwrap();
            run.mackey_glass(p, slot, start[0])?;
        }
    }
    Ok(run.out)
}

fn random_initial_state<T: Real>(kind: SystemKind, seed: u64) -> Vec<T> {
    let mut rng = seed::rng(seed::derive(seed, "initial-state"));
    let (lo, hi) = kind.initial_box();
    (0..kind.dimension()).map(|_| T::lit(rng.random_range(lo..hi))).collect()
}

struct Run<'a, T> {
    dt: T,
    steps: usize,
    opts: &'a IntegrateOptions<T>,
    signal: &'a Signal<T>,
    noise_rng: seed::Rng,
    out: Trajectory<T>,
}

impl<T: Real> Run<'_, T> {
    #[inline]
    fn kick(&mut self, x: &mut [T], clamp_nonnegative: bool) {
        if self.opts.dynamical_noise > T::zero() {
            let scale = self.opts.dynamical_noise * self.dt.sqrt();
            for v in x.iter_mut() {
                let z: f64 = self.noise_rng.sample(StandardNormal);
                *v += scale * T::lit(z);
                if clamp_nonnegative && *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
    }

    fn check(x: &[T], time: T) -> Result<()> {
        let guard = T::lit(DIVERGENCE_GUARD);
        if x.iter().all(|v| v.is_finite() && v.abs() <= guard) {
            Ok(())
        } else {
            Err(Error::Divergence { time: time.as_f64() })
        }
    }

    /// Time at the start of main-loop step `i`; transient steps have negative times.
    #[inline]
    fn step_time(&self, i: isize) -> T {
        T::from_isize(i).unwrap() * self.dt
    }

    fn record(&mut self, i: usize, x: &[T], p: T) {
        if (i + 1) % self.opts.record_every == 0 {
            self.out.states.extend_from_slice(x);
            self.out.param_trace.push(p);
        }
    }

    fn ode3<P>(
        &mut self,
        mut params: P,
        start: Vec<T>,
        nonnegative: bool,
        set: impl Fn(&mut P, T),
        deriv: impl Fn(&P, &[T; 3]) -> [T; 3],
    ) -> Result<()> {
        let mut x = [start[0], start[1], start[2]];
        let transient = self.opts.transient_steps as isize;
        let p0 = self.signal.at(T::zero());
        set(&mut params, p0);
        for i in -transient..0 {
            x = rk4_step(&x, self.dt, |s| deriv(&params, s));
            self.kick(&mut x, nonnegative);
            Self::check(&x, self.step_time(i + 1))?;
        }
        for i in 0..self.steps {
            let p = self.signal.at(self.step_time(i as isize));
            set(&mut params, p);
            x = rk4_step(&x, self.dt, |s| deriv(&params, s));
            self.kick(&mut x, nonnegative);
            Self::check(&x, self.step_time(i as isize + 1))?;
            self.record(i, &x, p);
        }
        Ok(())
    }

    fn mackey_glass(&mut self, mut params: MackeyGlassParams<T>, slot: usize, x0: T) -> Result<()> {
        let max_delay = if slot == 3 { self.signal.max_value() } else { params.tau };
        let mut history = DelayBuffer::new(max_delay.max(self.dt), self.dt, x0)?;
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let dt = self.dt;
        let sixth = dt / T::lit(6.0);
        let step = |params: &MackeyGlassParams<T>, history: &mut DelayBuffer<T>| -> Result<T> {
            let lag = snap(params.tau / dt);
            if lag < T::one() {
                return Err(Error::config("system.fixed_params.tau", "delay must be at least dt"));
            }
            let x = history.latest();
            let d0 = history.lookup(lag);
            let dh = history.lookup(lag - half);
            let d1 = history.lookup(lag - T::one());
            let k1 = params.deriv(x, d0);
            let k2 = params.deriv(x + half * dt * k1, dh);
            let k3 = params.deriv(x + half * dt * k2, dh);
            let k4 = params.deriv(x + dt * k3, d1);
            Ok(x + sixth * (k1 + two * k2 + two * k3 + k4))
        };
        params.set(slot, self.signal.at(T::zero()));
        let transient = self.opts.transient_steps as isize;
        for i in -transient..0 {
            let mut x = [step(&params, &mut history)?];
            self.kick(&mut x, false);
            Self::check(&x, self.step_time(i + 1))?;
            history.push(x[0]);
        }
        for i in 0..self.steps {
            let p = self.signal.at(self.step_time(i as isize));
            params.set(slot, p);
            let mut x = [step(&params, &mut history)?];
            self.kick(&mut x, false);
            Self::check(&x, self.step_time(i as isize + 1))?;
            history.push(x[0]);
            self.record(i, &x, p);
        }
        Ok(())
    }
}
