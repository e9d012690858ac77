//! End-to-end runs: integrated training series, training and calibration,
//! test tracking and scoring.
//!
//! The expensive inputs (level trajectories, calibration runs, the test run)
//! are full-state [`ObservationSeries`] that do not depend on the mask or the
//! reservoir, so sweeps can build them once and reuse them.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{integrate_with, IntegrateOptions, SystemKind, SystemSpec, DEFAULT_TRANSIENT_STEPS};
use crate::error::{Error, Result};
use crate::format;
use crate::observation::{observe, sampled_parameter, ObservationSeries, ObservationSpec};
use crate::reservoir::{
    calibrate, init_reservoir, initial_state, Calibration, CalibrationMode, InputScaler, ReadoutTrainer,
    ReservoirHyperparams, Runner, TrainedTracker,
};
use crate::seed;
use crate::waveforms::{schedule_order, segment_count, training_values, Ordering, WaveformKind, WaveformSpec};

/// Samples averaged per calibration level, after the reservoir washout.
pub const CALIBRATION_SAMPLES: usize = 200;

/// Everything that defines one train-and-test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec<f64>,
    pub observation: ObservationSpec<f64>,
    #[serde(default)]
    pub hyper: ReservoirHyperparams<f64>,
    /// Number of distinct training levels.
    pub s_n: usize,
    /// Fraction of the test excursion spanned by the training levels.
    pub s_w: f64,
    /// Switching interval `ΔT_s`.
    pub switching_interval: f64,
    pub train_duration: f64,
    /// Also fixes the training range: levels span `base ± s_w·excursion`.
    pub test_waveform: WaveformSpec<f64>,
    pub test_duration: f64,
    #[serde(default)]
    pub ordering: Ordering,
    #[serde(default)]
    pub calibration: CalibrationMode,
    /// Std of additive dynamical noise applied in every integration.
    #[serde(default)]
    pub dynamical_noise: f64,
    #[serde(default = "default_transient")]
    pub transient_steps: usize,
    pub seed: u64,
}

fn default_transient() -> usize {
    DEFAULT_TRANSIENT_STEPS
}

/// Sampling interval used for each system by default.
pub fn default_sampling_interval(kind: SystemKind) -> f64 {
    match kind {
        SystemKind::FoodChain => 2.5,
        SystemKind::Rossler => 0.25,
        SystemKind::MackeyGlass => 2.0,
    }
}

/// Default switching interval: 25 samples.
pub fn default_switching_interval(kind: SystemKind) -> f64 {
    25.0 * default_sampling_interval(kind)
}

impl RunConfig {
    /// Defaults for tracking `param` of `kind` from `mask` under the default
    /// `waveform` test signal.
    pub fn canonical(kind: SystemKind, param: &str, mask: Vec<usize>, waveform: WaveformKind) -> Self {
        let system = SystemSpec::new(kind, param);
        let dts = default_switching_interval(kind);
        let base = system.nominal_value();
        RunConfig {
            observation: ObservationSpec::new(mask, default_sampling_interval(kind)),
            hyper: ReservoirHyperparams::default(),
            s_n: 5,
            s_w: 1.0,
            switching_interval: dts,
            train_duration: 900.0 * dts,
            test_waveform: WaveformSpec::test_default(waveform, base, 0.1 * base.abs(), dts),
            test_duration: 1000.0 * dts,
            ordering: Ordering::Random,
            calibration: CalibrationMode::Affine,
            dynamical_noise: 0.0,
            transient_steps: DEFAULT_TRANSIENT_STEPS,
            seed: 0,
            system,
        }
    }

    /// The same run with the default test signal of another kind.
    pub fn with_waveform(&self, kind: WaveformKind) -> Self {
        let base = self.test_waveform.base;
        let mut c = self.clone();
        c.test_waveform = WaveformSpec::test_default(kind, base, self.excursion().unwrap_or(0.1 * base.abs()), self.switching_interval);
        c
    }

    fn excursion(&self) -> Result<f64> {
        Ok(self.test_waveform.compile()?.peak_excursion())
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.observation.validate(self.system.dimension())?;
        self.hyper.validate()?;
        let ds = self.observation.sampling_interval;
        let steps = ds / self.system.dt;
        if !(steps >= 1.0 && (steps - steps.round()).abs() <= 1e-9 * steps) {
            return Err(Error::config(
                "observation.sampling_interval",
                format!("{ds} is not a positive multiple of dt = {}", self.system.dt),
            ));
        }
        if self.s_n == 0 {
            return Err(Error::config("s_n", "need at least one training level"));
        }
        if !(self.s_w > 0.0 && self.s_w <= 1.0) {
            return Err(Error::config("s_w", "must lie in (0, 1]"));
        }
        segment_count(self.switching_interval, ds, "switching_interval")?;
        segment_count(self.train_duration, self.switching_interval, "train_duration")?;
        if !(self.test_duration.is_finite() && self.test_duration >= self.train_duration) {
            return Err(Error::config("test_duration", "must be at least train_duration"));
        }
        let test_samples = (self.test_duration / ds).floor() as usize;
        if test_samples <= self.hyper.washout {
            return Err(Error::config("test_duration", "shorter than the washout"));
        }
        if !(self.dynamical_noise >= 0.0 && self.dynamical_noise.is_finite()) {
            return Err(Error::config("dynamical_noise", "must be non-negative"));
        }
        if self.excursion()? <= 0.0 {
            return Err(Error::config("test_waveform", "must vary: its excursion sets the training range"));
        }
        Ok(())
    }

    /// Training parameter levels.
    pub fn levels(&self) -> Result<Vec<f64>> {
        training_values(self.test_waveform.base, self.excursion()?, self.s_n, self.s_w)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        crate::reservoir::hex(&Sha256::digest(&json))
    }

    fn run_options(&self) -> IntegrateOptions<f64> {
        IntegrateOptions {
            record_every: (self.observation.sampling_interval / self.system.dt).round() as usize,
            dynamical_noise: self.dynamical_noise,
            transient_steps: self.transient_steps,
        }
    }

    /// Integrate under `signal` from a seeded random start and observe every
    /// component. Returns the series and the parameter at each sample.
    fn full_observation(&self, signal: &WaveformSpec<f64>, duration: f64, label: &str, index: u64) -> Result<(ObservationSeries<f64>, Vec<f64>)> {
        let run_seed = seed::derive_indexed(self.seed, label, index);
        let traj = integrate_with(&self.system, None, signal, duration, run_seed, &self.run_options())?;
        let spec = ObservationSpec {
            mask: (0..self.system.dimension()).collect(),
            sampling_interval: self.observation.sampling_interval,
            measurement_noise: self.observation.measurement_noise,
            seed: seed::derive_indexed(run_seed, "observation", self.observation.seed),
        };
        let series = observe(&traj, &spec)?;
        let p = sampled_parameter(&traj, self.observation.sampling_interval)?;
        Ok((series, p))
    }
}

/// Full-state source data for training and calibration.
#[derive(Debug, Clone)]
pub struct TrainingSources {
    pub levels: Vec<f64>,
    /// One post-transient trajectory per level, long enough for any ordering.
    pub per_level: Vec<ObservationSeries<f64>>,
    pub segment_samples: usize,
    /// Level index of every training segment, in stream order.
    pub order: Vec<usize>,
    /// Constant-parameter runs at the lowest and highest level.
    pub calibration: [ObservationSeries<f64>; 2],
}

impl TrainingSources {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let levels = config.levels()?;
        let ds = config.observation.sampling_interval;
        let segment_samples = segment_count(config.switching_interval, ds, "switching_interval")?;
        let n_segments = segment_count(config.train_duration, config.switching_interval, "train_duration")?;
        let order = schedule_order(levels.len(), n_segments, config.ordering, seed::derive(config.seed, "schedule"));
        let per_source = n_segments.div_ceil(levels.len());
        let duration = per_source as f64 * config.switching_interval;
        let per_level = levels
            .iter()
            .enumerate()
            .map(|(i, &v)| Ok(config.full_observation(&WaveformSpec::constant(v), duration, "train-source", i as u64)?.0))
            .collect::<Result<Vec<_>>>()?;
        let calibration = calibration_runs(config, &levels)?;
        Ok(Self {
            levels,
            per_level,
            segment_samples,
            order,
            calibration,
        })
    }

    /// Reorder the segments with another schedule seed.
    pub fn reordered(&self, ordering: Ordering, schedule_seed: u64) -> Self {
        let mut s = self.clone();
        s.order = schedule_order(self.levels.len(), self.order.len(), ordering, schedule_seed);
        s
    }

    /// The integrated training series under `mask` and its aligned target:
    /// each level's trajectory is cut sequentially into segments that are
    /// consumed without reuse.
    pub fn assemble(&self, mask: &[usize]) -> Result<(ObservationSeries<f64>, Vec<f64>)> {
        let first = &self.per_level[0];
        let mut y = ObservationSeries::empty(mask.len(), first.interval, first.interval);
        let mut p = Vec::with_capacity(self.order.len() * self.segment_samples);
        let masked = self
            .per_level
            .iter()
            .map(|s| s.select(mask))
            .collect::<Result<Vec<_>>>()?;
        let mut used = vec![0usize; self.levels.len()];
        for &level in &self.order {
            let start = used[level] * self.segment_samples;
            let end = start + self.segment_samples;
            y.extend_from(&masked[level], start, end);
            p.extend(std::iter::repeat_n(self.levels[level], self.segment_samples));
            used[level] += 1;
        }
        Ok((y, p))
    }
}

/// Integrated training input and piecewise-constant target for `config`.
pub fn build_training_set(config: &RunConfig) -> Result<(ObservationSeries<f64>, Vec<f64>)> {
    TrainingSources::build(config)?.assemble(&config.observation.mask)
}

/// Train on `sources` and calibrate on its two extreme levels.
pub fn train_with(config: &RunConfig, sources: &TrainingSources) -> Result<TrainedTracker<f64>> {
    let mask = &config.observation.mask;
    let hyper = &config.hyper;
    let (y, p) = sources.assemble(mask)?;
    if y.len() <= hyper.washout {
        return Err(Error::config("train_duration", "training series is shorter than the washout"));
    }
    let scaler = InputScaler::from_series(&y);
    let matrices = init_reservoir(hyper, mask.len(), seed::derive(config.seed, "reservoir"))?;
    let readout = {
        let init = initial_state(hyper.size, seed::derive(config.seed, "train-initial-state"));
        let mut runner = Runner::new(&matrices, hyper.leakage, &scaler, init)?;
        let mut trainer = ReadoutTrainer::new(hyper.size);
        for (k, &target) in p.iter().enumerate() {
            let r = runner.step(y.sample(k))?;
            if k >= hyper.washout {
                trainer.push(r, target);
            }
        }
        trainer.solve(hyper.ridge)?
    };
    let tracker = TrainedTracker {
        matrices,
        readout,
        calibration: Calibration::identity(),
        hyper: hyper.clone(),
        input_stats: scaler,
        mask: mask.clone(),
    };
    fit_calibration(config, &tracker, &sources.levels, &sources.calibration)
}

/// Constant-parameter runs at the lowest and highest level.
fn calibration_runs(config: &RunConfig, levels: &[f64]) -> Result<[ObservationSeries<f64>; 2]> {
    let duration = (config.hyper.washout + CALIBRATION_SAMPLES) as f64 * config.observation.sampling_interval;
    let run = |i: u64, v: f64| -> Result<_> { Ok(config.full_observation(&WaveformSpec::constant(v), duration, "calibration", i)?.0) };
    Ok([run(0, levels[0])?, run(1, levels[levels.len() - 1])?])
}

fn fit_calibration(
    config: &RunConfig,
    tracker: &TrainedTracker<f64>,
    levels: &[f64],
    runs: &[ObservationSeries<f64>; 2],
) -> Result<TrainedTracker<f64>> {
    let lo = levels[0];
    let hi = levels[levels.len() - 1];
    let washout = tracker.hyper.washout;
    let mut pairs = [(lo, 0.0), (hi, 0.0)];
    for (pair, series) in pairs.iter_mut().zip(runs) {
        let raw = tracker.raw_outputs(&series.select(&tracker.mask)?)?;
        let tail = &raw[washout.min(raw.len() - 1)..];
        pair.1 = tail.iter().sum::<f64>() / tail.len() as f64;
    }
    // A single level gives one reference point: only an offset is identifiable.
    let mode = match config.calibration {
        CalibrationMode::Affine if lo == hi => CalibrationMode::OffsetOnly,
        m => m,
    };
    calibrate(tracker, &pairs, mode)
}

/// Refit the calibration of an already trained tracker at the extreme
/// training levels of `config`. The tracker's mask must match the config.
pub fn recalibrate(config: &RunConfig, tracker: &TrainedTracker<f64>) -> Result<TrainedTracker<f64>> {
    config.validate()?;
    check_mask(config, tracker)?;
    let levels = config.levels()?;
    fit_calibration(config, tracker, &levels, &calibration_runs(config, &levels)?)
}

/// Build the training set, then train and calibrate a tracker.
pub fn train_tracker(config: &RunConfig) -> Result<TrainedTracker<f64>> {
    train_with(config, &TrainingSources::build(config)?)
}

/// Calibrated in-sample error on the integrated training series, past the
/// washout. Returns `(rmse, nrmse)`.
pub fn training_error(config: &RunConfig, sources: &TrainingSources, tracker: &TrainedTracker<f64>) -> Result<(f64, f64)> {
    let (y, p) = sources.assemble(&tracker.mask)?;
    let init = initial_state(tracker.hyper.size, seed::derive(config.seed, "train-initial-state"));
    let mut runner = Runner::new(&tracker.matrices, tracker.hyper.leakage, &tracker.input_stats, init)?;
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let r = runner.step(y.sample(k))?;
        out.push(tracker.calibration.apply(tracker.readout.apply(r)));
    }
    let w = tracker.hyper.washout;
    let e = rmse(&out[w..], &p[w..])?;
    Ok((e, normalized(e, &p[w..])))
}

/// Full-state observation of the test run and its ground truth.
#[derive(Debug, Clone)]
pub struct TestSource {
    pub series: ObservationSeries<f64>,
    pub truth: Vec<f64>,
}

impl TestSource {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let (series, truth) = config.full_observation(&config.test_waveform, config.test_duration, "test", 0)?;
        Ok(Self { series, truth })
    }
}

/// Tracked and true parameter after the test washout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub times: Vec<f64>,
    pub tracked: Vec<f64>,
    pub truth: Vec<f64>,
    pub rmse: f64,
    /// `rmse / (max(p) − min(p))`.
    pub nrmse: f64,
    pub config_hash: String,
    pub seed: u64,
}

impl TrackingResult {
    /// CSV with columns `t,p_true,o_tracked`.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        format::write_row(w, &["t".into(), "p_true".into(), "o_tracked".into()])?;
        for ((t, p), o) in self.times.iter().zip(&self.truth).zip(&self.tracked) {
            format::write_row(w, &[format::num(*t), format::num(*p), format::num(*o)])?;
        }
        Ok(())
    }

    pub const SUMMARY_HEADER: [&'static str; 4] = ["config_hash", "seed", "rmse", "nrmse"];

    pub fn summary_fields(&self) -> Vec<String> {
        vec![
            self.config_hash.clone(),
            self.seed.to_string(),
            format::num(self.rmse),
            format::num(self.nrmse),
        ]
    }

    /// Header plus the one-line summary record.
    pub fn write_summary(&self, w: &mut impl Write) -> std::io::Result<()> {
        format::write_row(w, &Self::SUMMARY_HEADER.map(String::from))?;
        format::write_row(w, &self.summary_fields())
    }
}

/// Track `source` with `tracker` and score it past the washout.
pub fn track_source(config: &RunConfig, tracker: &TrainedTracker<f64>, source: &TestSource) -> Result<TrackingResult> {
    check_mask(config, tracker)?;
    let series = source.series.select(&tracker.mask)?;
    let out = crate::reservoir::track(tracker, &series)?;
    let w = config.hyper.washout.max(tracker.hyper.washout);
    let tracked = out[w..].to_vec();
    let truth = source.truth[w..].to_vec();
    let times = (w..series.len()).map(|k| series.time(k)).collect();
    let e = rmse(&tracked, &truth)?;
    Ok(TrackingResult {
        times,
        nrmse: normalized(e, &truth),
        rmse: e,
        tracked,
        truth,
        config_hash: config.fingerprint(),
        seed: config.seed,
    })
}

fn check_mask(config: &RunConfig, tracker: &TrainedTracker<f64>) -> Result<()> {
    if tracker.mask != config.observation.mask {
        return Err(Error::config(
            "observation.mask",
            format!("tracker was trained on {:?}, config observes {:?}", tracker.mask, config.observation.mask),
        ));
    }
    Ok(())
}

/// Integrate and observe the test run, then track and score it.
pub fn run_tracking(config: &RunConfig, tracker: &TrainedTracker<f64>) -> Result<TrackingResult> {
    track_source(config, tracker, &TestSource::build(config)?)
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::config(
            "series",
            format!("rmse needs equal non-empty lengths, got {} and {}", a.len(), b.len()),
        ));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// RMSE over the peak-to-peak range of `truth`. A flat truth gives 0 for a
/// perfect fit and infinity otherwise.
fn normalized(rmse: f64, truth: &[f64]) -> f64 {
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range > 0.0 {
        rmse / range
    } else if rmse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
