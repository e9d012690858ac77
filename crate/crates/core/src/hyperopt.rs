//! Bayesian optimization of the six reservoir hyperparameters.
//!
//! The optimizer itself works on any box: points are mapped to the unit cube
//! (log axes through `ln`), a GP with an ARD squared-exponential kernel is fit
//! to standardized objective values, and expected improvement picks the next
//! point among random candidates.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::format;
use crate::linalg::{Cholesky, Matrix};
use crate::pipeline::{run_tracking, train_tracker, RunConfig};
use crate::reservoir::ReservoirHyperparams;
use crate::seed;
use crate::waveforms::WaveformSpec;

/// Score given to failed or non-finite evaluations.
pub const PENALTY: f64 = 10.0;
pub const INITIAL_POINTS: usize = 10;
pub const CANDIDATES: usize = 1000;
pub const GP_NOISE: f64 = 1e-4;
pub const LIKELIHOOD_EVALUATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log: bool,
}

impl Axis {
    pub const fn linear(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: false }
    }

    pub const fn log(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: true }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::config(name, "need finite lo < hi"));
        }
        if self.log && self.lo <= 0.0 {
            return Err(Error::config(name, "log axis must be strictly positive"));
        }
        Ok(())
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        if self.log {
            (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (x - self.lo) / (self.hi - self.lo)
        }
    }

    /// Inverse of [`Axis::to_unit`], clamped into the bounds.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        };
        x.clamp(self.lo, self.hi)
    }
}

/// Bounds for the tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub spectral_radius: Axis,
    pub input_scaling: Axis,
    pub leakage: Axis,
    pub density: Axis,
    pub bias_scaling: Axis,
    pub ridge: Axis,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            spectral_radius: Axis::linear(0.1, 1.5),
            input_scaling: Axis::log(0.01, 5.0),
            leakage: Axis::linear(0.05, 1.0),
            density: Axis::log(0.005, 0.2),
            bias_scaling: Axis::linear(0.0, 2.0),
            ridge: Axis::log(1e-9, 1e-1),
        }
    }
}

impl SearchSpace {
    pub const NAMES: [&'static str; 6] =
        ["spectral_radius", "input_scaling", "leakage", "density", "bias_scaling", "ridge"];

    pub fn axes(&self) -> [Axis; 6] {
        [
            self.spectral_radius,
            self.input_scaling,
            self.leakage,
            self.density,
            self.bias_scaling,
            self.ridge,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (a, n) in self.axes().iter().zip(Self::NAMES) {
            a.validate(&format!("search_space.{n}"))?;
        }
        Ok(())
    }

    /// `base` with the six tuned values replaced by `x`.
    pub fn apply(&self, base: &ReservoirHyperparams<f64>, x: &[f64]) -> ReservoirHyperparams<f64> {
        let mut h = base.clone();
        h.spectral_radius = x[0];
        h.input_scaling = x[1];
        h.leakage = x[2];
        h.density = x[3];
        h.bias_scaling = x[4];
        h.ridge = x[5];
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    GpEi,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRecord {
    pub names: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub best_index: usize,
}

impl OptRecord {
    pub fn best_point(&self) -> &[f64] {
        &self.points[self.best_index]
    }

    pub fn best_value(&self) -> f64 {
        self.values[self.best_index]
    }

    pub fn budget_used(&self) -> usize {
        self.values.len()
    }

    /// Running minimum after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.values
            .iter()
            .scan(f64::INFINITY, |b, &v| {
                *b = b.min(v);
                Some(*b)
            })
            .collect()
    }

    /// One row per evaluation: `eval,<names…>,objective,best`.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut header = vec!["eval".to_string()];
        header.extend(self.names.iter().cloned());
        header.extend(["objective".to_string(), "best".to_string()]);
        format::write_row(w, &header)?;
        for (i, ((p, v), b)) in self.points.iter().zip(&self.values).zip(self.best_so_far()).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|&x| format::num(x)));
            row.extend([format::num(*v), format::num(b)]);
            format::write_row(w, &row)?;
        }
        Ok(())
    }
}

/// Minimize `objective` over the box `axes` with `budget` evaluations.
///
/// The first [`INITIAL_POINTS`] evaluations (a randomly shifted Halton
/// design) run in parallel; each later point is chosen by expected
/// improvement. [`Method::Random`] draws every point uniformly instead.
pub fn optimize<F>(axes: &[Axis], names: &[&str], objective: F, budget: usize, seed: u64, method: Method) -> Result<OptRecord>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if budget < INITIAL_POINTS {
        return Err(Error::config("budget", format!("must be at least {INITIAL_POINTS}")));
    }
    if axes.is_empty() || names.len() != axes.len() {
        return Err(Error::config("search_space", "one name per axis required"));
    }
    for (a, n) in axes.iter().zip(names) {
        a.validate(n)?;
    }
    let d = axes.len();
    let mut rng = seed::rng(seed::derive(seed, "hyperopt"));
    let to_point = |u: &[f64]| -> Vec<f64> { axes.iter().zip(u).map(|(a, &x)| a.from_unit(x)).collect() };
    let eval = |u: &[f64]| -> f64 {
        let v = objective(&to_point(u));
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    };

    let initial: Vec<Vec<f64>> = match method {
        Method::GpEi => {
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (0..INITIAL_POINTS).map(|i| halton(i + 1, &shift)).collect()
        }
        Method::Random => (0..budget).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect(),
    };
    let mut us = initial;
    let mut values: Vec<f64> = us.par_iter().map(|u| eval(u)).collect();

    if method == Method::GpEi {
        let mut gp_rng = seed::rng(seed::derive(seed, "gp"));
        while values.len() < budget {
            let next = propose(&us, &values, &mut gp_rng);
            values.push(eval(&next));
            us.push(next);
        }
    }

    let best_index = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < values[b] { i } else { b });
    Ok(OptRecord {
        names: names.iter().map(|s| s.to_string()).collect(),
        points: us.iter().map(|u| to_point(u)).collect(),
        values,
        best_index,
    })
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn halton(index: usize, shift: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let base = PRIMES[j % PRIMES.len()] as f64;
            let (mut f, mut r, mut i) = (1.0, 0.0, index as f64);
            while i > 0.0 {
                f /= base;
                r += f * (i % base);
                i = (i / base).floor();
            }
            (r + s).fract()
        })
        .collect()
}

/// Zero-mean GP on standardized targets with unit signal variance.
struct Gp {
    x: Vec<Vec<f64>>,
    inv_len2: Vec<f64>,
    chol: Cholesky<f64>,
    alpha: Vec<f64>,
}

fn kernel(a: &[f64], b: &[f64], inv_len2: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).zip(inv_len2).map(|((x, y), l)| (x - y) * (x - y) * l).sum();
    (-0.5 * s).exp()
}

impl Gp {
    fn fit(x: &[Vec<f64>], y: &[f64], log_len: &[f64]) -> Option<(Self, f64)> {
        let n = x.len();
        let inv_len2: Vec<f64> = log_len.iter().map(|l| (-2.0 * l).exp()).collect();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(&x[i], &x[j], &inv_len2) + if i == j { GP_NOISE } else { 0.0 };
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        let chol = Cholesky::factor(&k)?;
        let alpha = chol.solve(y);
        let nll = 0.5 * y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()
            + 0.5 * chol.log_det()
            + 0.5 * n as f64 * std::f64::consts::TAU.ln();
        Some((
            Self {
                x: x.to_vec(),
                inv_len2,
                chol,
                alpha,
            },
            nll,
        ))
    }

    fn predict(&self, u: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = self.x.iter().map(|xi| kernel(xi, u, &self.inv_len2)).collect();
        let mean = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.forward(&ks);
        let var = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).max(1e-12);
        (mean, var.sqrt())
    }
}

const LOG_LEN_RANGE: (f64, f64) = (-4.6, 2.3); // lengthscales in [0.01, 10]

/// Maximum-likelihood lengthscales by multi-start coordinate search.
fn fit_lengthscales(x: &[Vec<f64>], y: &[f64], rng: &mut seed::Rng) -> Option<Gp> {
    let d = x[0].len();
    let (lo, hi) = LOG_LEN_RANGE;
    let starts: Vec<Vec<f64>> = std::iter::once(vec![(0.3f64).ln(); d])
        .chain((0..2).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()))
        .collect();
    let per_start = LIKELIHOOD_EVALUATIONS / starts.len();
    let mut best: Option<(Gp, f64)> = None;
    for mut theta in starts {
        let mut evals = 1;
        let Some(mut current) = Gp::fit(x, y, &theta) else { continue };
        let mut step = 1.0;
        while evals < per_start && step > 1e-2 {
            let mut improved = false;
            for i in 0..d {
                for dir in [1.0, -1.0] {
                    if evals >= per_start {
                        break;
                    }
                    let mut t = theta.clone();
                    t[i] = (t[i] + dir * step).clamp(lo, hi);
                    evals += 1;
                    if let Some(fit) = Gp::fit(x, y, &t) {
                        if fit.1 < current.1 {
                            current = fit;
                            theta = t;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|b| current.1 < b.1) {
            best = Some(current);
        }
    }
    best.map(|b| b.0)
}

fn expected_improvement(mean: f64, sd: f64, best: f64, normal: &Normal) -> f64 {
    let z = (best - mean) / sd;
    (best - mean) * normal.cdf(z) + sd * normal.pdf(z)
}

/// Next point in the unit cube by EI over random candidates.
fn propose(us: &[Vec<f64>], values: &[f64], rng: &mut seed::Rng) -> Vec<f64> {
    let d = us[0].len();
    let n = values.len() as f64;
    // Positive objectives (errors) are modelled on a log scale so that a few
    // penalty values do not flatten the surrogate everywhere else.
    let warped: Vec<f64> = if values.iter().all(|&v| v > 0.0) {
        values.iter().map(|v| v.ln()).collect()
    } else {
        values.to_vec()
    };
    let mean = warped.iter().sum::<f64>() / n;
    let sd = (warped.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let y: Vec<f64> = warped.iter().map(|v| (v - mean) / sd).collect();
    let best = y.iter().copied().fold(f64::INFINITY, f64::min);
    let candidates: Vec<Vec<f64>> = (0..CANDIDATES).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let Some(gp) = fit_lengthscales(us, &y, rng) else {
        return candidates.into_iter().next().unwrap();
    };
    let normal = Normal::standard();
    let mut pick = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let (m, s) = gp.predict(c);
        let ei = expected_improvement(m, s, best, &normal);
        if ei > top {
            top = ei;
            pick = i;
        }
    }
    candidates[pick].clone()
}

/// Held-out validation signal: a pure sine (no frequency modulation) at a
/// carrier period not used by the test waveforms, same excursion.
pub fn validation_waveform(config: &RunConfig) -> Result<WaveformSpec<f64>> {
    let excursion = config.test_waveform.compile()?.peak_excursion();
    let tc = 160.0 * config.switching_interval;
    Ok(WaveformSpec::fm(config.test_waveform.base, excursion, tc, 4.0 * tc, 0.0))
}

/// Mean validation NRMSE over `n_seeds` independently seeded runs. Failed
/// runs score [`PENALTY`].
pub fn objective(hyper: &ReservoirHyperparams<f64>, config: &RunConfig, n_seeds: usize) -> f64 {
    let Ok(validation) = validation_waveform(config) else {
        return PENALTY;
    };
    let scores: Vec<f64> = (0..n_seeds.max(1))
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.hyper = hyper.clone();
            c.test_waveform = validation.clone();
            c.seed = seed::derive_indexed(config.seed, "validation", i as u64);
            match train_tracker(&c).and_then(|t| run_tracking(&c, &t)) {
                Ok(r) if r.nrmse.is_finite() => r.nrmse.min(PENALTY),
                _ => PENALTY,
            }
        })
        .collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Tune the six hyperparameters of `config`.
pub fn tune(
    config: &RunConfig,
    space: &SearchSpace,
    budget: usize,
    n_seeds: usize,
    seed: u64,
    method: Method,
) -> Result<OptRecord> {
    config.validate()?;
    space.validate()?;
    if n_seeds == 0 {
        return Err(Error::config("n_seeds", "must be at least 1"));
    }
    optimize(
        &space.axes(),
        &SearchSpace::NAMES,
        |x| objective(&space.apply(&config.hyper, x), config, n_seeds),
        budget,
        seed,
        method,
    )
}

/// `{"hyper": {…}}` with the best point applied to `base`, ready to merge
/// into a run configuration.
pub fn best_fragment(record: &OptRecord, space: &SearchSpace, base: &ReservoirHyperparams<f64>) -> serde_json::Value {
    serde_json::json!({ "hyper": space.apply(base, record.best_point()) })
}
