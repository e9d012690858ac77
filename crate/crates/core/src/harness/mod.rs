//! Experiment harness: parameter sweeps, success rates, figure reproduction
//! and result persistence.
//!
//! Work is split into one job per realization. Inside a job, training and
//! test sources are cached by the part of the config they depend on, so a
//! mask sweep integrates the system once per realization and waveform, and a
//! tracker is trained once and tested on every requested waveform.

pub mod plot;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::SystemKind;
use crate::error::{Error, Result};
use crate::format;
use crate::hyperopt::PENALTY;
use crate::observation::enumerate_masks;
use crate::pipeline::{track_source, train_with, RunConfig, TestSource, TrainingSources};
use crate::reservoir::ReservoirHyperparams;
use crate::seed;
use crate::waveforms::WaveformKind;
use plot::{render_plot, PlotKind, PlotTable, Series};

pub const DEFAULT_REALIZATIONS: usize = 50;
pub const DEFAULT_THRESHOLD: f64 = 0.1;
/// Waveform order used in tables and plots.
pub const WAVEFORMS: [WaveformKind; 3] = [WaveformKind::Fm, WaveformKind::Sawtooth, WaveformKind::Am];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SN,
    SW,
    Mask,
    MeasurementNoise,
    DynamicalNoise,
    ReservoirSize,
    TrainDuration,
    SwitchingInterval,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::SN => "s_n",
            SweepAxis::SW => "s_w",
            SweepAxis::Mask => "mask",
            SweepAxis::MeasurementNoise => "measurement_noise",
            SweepAxis::DynamicalNoise => "dynamical_noise",
            SweepAxis::ReservoirSize => "reservoir_size",
            SweepAxis::TrainDuration => "train_duration",
            SweepAxis::SwitchingInterval => "switching_interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Mask(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub base: RunConfig,
    /// Test waveforms, each tracked by the same trained tracker.
    #[serde(default = "default_waveforms")]
    pub waveforms: Vec<WaveformKind>,
}

fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}

fn default_waveforms() -> Vec<WaveformKind> {
    WAVEFORMS.to_vec()
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "sweep needs at least one value"));
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be at least 1"));
        }
        if self.waveforms.is_empty() {
            return Err(Error::config("waveforms", "need at least one test waveform"));
        }
        if let Some(w) = self
            .waveforms
            .iter()
            .find(|w| matches!(w, WaveformKind::Constant | WaveformKind::PiecewiseConstant))
        {
            return Err(Error::config("waveforms", format!("{} cannot be a test waveform", w.label())));
        }
        for (i, v) in self.values.iter().enumerate() {
            apply_axis(&self.base, self.axis, v)
                .and_then(|c| c.validate())
                .map_err(|e| match e {
                    Error::Config { path, message } => Error::config(format!("values[{i}] ({path})"), message),
                    other => other,
                })?;
        }
        Ok(())
    }
}

/// `base` with the swept quantity set to `value`.
pub fn apply_axis(base: &RunConfig, axis: SweepAxis, value: &SweepValue) -> Result<RunConfig> {
    let mut c = base.clone();
    let num = || match value {
        SweepValue::Number(v) => Ok(*v),
        SweepValue::Mask(_) => Err(Error::config(axis.label(), "expected a number")),
    };
    let count = |v: f64| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::config(axis.label(), format!("{v} is not a positive integer")))
        }
    };
    match axis {
        SweepAxis::SN => c.s_n = count(num()?)?,
        SweepAxis::SW => c.s_w = num()?,
        SweepAxis::Mask => match value {
            SweepValue::Mask(m) => c.observation.mask = m.clone(),
            SweepValue::Number(_) => return Err(Error::config("mask", "expected a list of state indices")),
        },
        SweepAxis::MeasurementNoise => c.observation.measurement_noise = num()?,
        SweepAxis::DynamicalNoise => c.dynamical_noise = num()?,
        SweepAxis::ReservoirSize => c.hyper.size = count(num()?)?,
        SweepAxis::TrainDuration => {
            c.train_duration = num()?;
            c.test_duration = c.test_duration.max(c.train_duration);
        }
        SweepAxis::SwitchingInterval => c.switching_interval = num()?,
    }
    Ok(c)
}

/// Display label of a sweep value; masks use component names, e.g. `R+C`.
pub fn value_label(kind: SystemKind, value: &SweepValue) -> String {
    match value {
        SweepValue::Number(v) => format::num(*v),
        SweepValue::Mask(m) => mask_label(kind, m),
    }
}

pub fn mask_label(kind: SystemKind, mask: &[usize]) -> String {
    let names = kind.component_names();
    mask.iter().map(|&i| names.get(i).copied().unwrap_or("?")).collect::<Vec<_>>().join("+")
}

/// One train-and-track outcome. Failed runs carry [`PENALTY`] as errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub label: String,
    pub realization: usize,
    pub seed: u64,
    pub waveform: WaveformKind,
    pub rmse: f64,
    pub nrmse: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: usize,
    pub label: String,
    pub waveform: WaveformKind,
    pub n: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub mean_nrmse: f64,
    pub std_nrmse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// Seed of realization `r` under `master`.
pub fn realization_seed(master: u64, r: usize) -> u64 {
    seed::derive_indexed(master, "realization", r as u64)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn training_key(c: &RunConfig) -> String {
    let mut k = c.clone();
    k.observation.mask.clear();
    let washout = k.hyper.washout;
    k.hyper = ReservoirHyperparams {
        washout,
        ..Default::default()
    };
    k.calibration = Default::default();
    k.fingerprint()
}

fn test_key(c: &RunConfig, kind: WaveformKind) -> String {
    let mut k = c.with_waveform(kind);
    k.observation.mask.clear();
    k.hyper = Default::default();
    k.s_n = 1;
    k.s_w = 1.0;
    k.train_duration = 0.0;
    k.switching_interval = 0.0;
    k.ordering = Default::default();
    k.calibration = Default::default();
    k.fingerprint()
}

/// Run every config of `variants` (already carrying its seed) against every
/// waveform, sharing sources where the configs allow it.
fn run_job(variants: &[(usize, String, RunConfig)], waveforms: &[WaveformKind], realization: usize) -> Vec<SweepRow> {
    let mut train_cache: BTreeMap<String, std::result::Result<TrainingSources, String>> = BTreeMap::new();
    let mut test_cache: BTreeMap<String, std::result::Result<TestSource, String>> = BTreeMap::new();
    let mut rows = Vec::new();
    for (value, label, config) in variants {
        let sources = train_cache
            .entry(training_key(config))
            .or_insert_with(|| TrainingSources::build(config).map_err(|e| e.to_string()));
        let tracker = match sources {
            Ok(s) => train_with(config, s).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        for &kind in waveforms {
            let c = config.with_waveform(kind);
            let outcome = tracker.as_ref().map_err(|e| e.clone()).and_then(|t| {
                let src = test_cache
                    .entry(test_key(config, kind))
                    .or_insert_with(|| TestSource::build(&c).map_err(|e| e.to_string()));
                match src {
                    Ok(s) => track_source(&c, t, s).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                }
            });
            let (rmse, nrmse, failure) = match outcome {
                Ok(r) if r.rmse.is_finite() && r.nrmse.is_finite() => (r.rmse, r.nrmse, None),
                Ok(_) => (PENALTY, PENALTY, Some("non-finite error".to_string())),
                Err(e) => (PENALTY, PENALTY, Some(e)),
            };
            rows.push(SweepRow {
                value: *value,
                label: label.clone(),
                realization,
                seed: config.seed,
                waveform: kind,
                rmse,
                nrmse,
                failure,
            });
        }
    }
    rows
}

/// Aggregate rows by `(value, waveform)` in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, WaveformKind)> = Vec::new();
    let mut groups: BTreeMap<(usize, WaveformKind), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let k = (r.value, r.waveform);
        groups.entry(k).or_insert_with(|| {
            keys.push(k);
            Vec::new()
        });
        groups.get_mut(&k).unwrap().push(r);
    }
    keys.sort_by_key(|&(v, w)| (v, WAVEFORMS.iter().position(|&x| x == w).unwrap_or(usize::MAX)));
    keys.iter()
        .map(|k| {
            let g = &groups[k];
            let rm: Vec<f64> = g.iter().map(|r| r.rmse).collect();
            let nr: Vec<f64> = g.iter().map(|r| r.nrmse).collect();
            let (mean_rmse, std_rmse) = mean_std(&rm);
            let (mean_nrmse, std_nrmse) = mean_std(&nr);
            SummaryRow {
                value: k.0,
                label: g[0].label.clone(),
                waveform: k.1,
                n: g.len(),
                mean_rmse,
                std_rmse,
                mean_nrmse,
                std_nrmse,
                failures: g.iter().filter(|r| r.failure.is_some()).count(),
            }
        })
        .collect()
}

/// Run `spec.realizations` seeded pipelines for each axis value.
/// Failures become penalty rows; the sweep itself only fails on an invalid
/// spec.
pub fn sweep(spec: &SweepSpec, master_seed: u64) -> Result<SweepTable> {
    spec.validate()?;
    let kind = spec.base.system.name;
    let jobs: Vec<usize> = (0..spec.realizations).collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&r| {
            let seed = realization_seed(master_seed, r);
            let variants: Vec<(usize, String, RunConfig)> = spec
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut c = apply_axis(&spec.base, spec.axis, v).expect("validated");
                    c.seed = seed;
                    (i, value_label(kind, v), c)
                })
                .collect();
            run_job(&variants, &spec.waveforms, r)
        })
        .flatten()
        .collect();
    let mut rows = rows;
    rows.sort_by_key(|r| (r.value, r.realization, WAVEFORMS.iter().position(|&w| w == r.waveform)));
    let summary = summarize(&rows);
    Ok(SweepTable {
        axis: spec.axis,
        rows,
        summary,
    })
}

impl SweepTable {
    pub const ROW_HEADER: [&'static str; 8] = ["axis", "value", "waveform", "realization", "seed", "rmse", "nrmse", "status"];
    pub const SUMMARY_HEADER: [&'static str; 9] = [
        "axis",
        "value",
        "waveform",
        "n",
        "mean_rmse",
        "std_rmse",
        "mean_nrmse",
        "std_nrmse",
        "failures",
    ];

    /// Rows prefixed with `extra` leading columns (e.g. the parameter).
    pub fn write_rows(&self, w: &mut impl Write, extra: &[(&str, &str)], header: bool) -> std::io::Result<()> {
        if header {
            let mut h: Vec<String> = extra.iter().map(|(k, _)| k.to_string()).collect();
            h.extend(Self::ROW_HEADER.iter().map(|s| s.to_string()));
            format::write_row(w, &h)?;
        }
        for r in &self.rows {
            let mut f: Vec<String> = extra.iter().map(|(_, v)| v.to_string()).collect();
            f.extend([
                self.axis.label().to_string(),
                r.label.clone(),
                r.waveform.label().to_string(),
                r.realization.to_string(),
                r.seed.to_string(),
                format::num(r.rmse),
                format::num(r.nrmse),
                r.failure.as_ref().map_or("ok".to_string(), |e| format!("failed: {}", e.replace([',', '\n'], ";"))),
            ]);
            format::write_row(w, &f)?;
        }
        Ok(())
    }

    pub fn write_summary(&self, w: &mut impl Write, extra: &[(&str, &str)], header: bool) -> std::io::Result<()> {
        if header {
            let mut h: Vec<String> = extra.iter().map(|(k, _)| k.to_string()).collect();
            h.extend(Self::SUMMARY_HEADER.iter().map(|s| s.to_string()));
            format::write_row(w, &h)?;
        }
        for s in &self.summary {
            let mut f: Vec<String> = extra.iter().map(|(_, v)| v.to_string()).collect();
            f.extend([
                self.axis.label().to_string(),
                s.label.clone(),
                s.waveform.label().to_string(),
                s.n.to_string(),
                format::num(s.mean_rmse),
                format::num(s.std_rmse),
                format::num(s.mean_nrmse),
                format::num(s.std_nrmse),
                s.failures.to_string(),
            ]);
            format::write_row(w, &f)?;
        }
        Ok(())
    }

    /// Mean RMSE against the axis value, one series per waveform.
    pub fn line_plot(&self, numeric: &[f64], title: &str, provenance: &str) -> PlotTable {
        let mut series = Vec::new();
        for kind in WAVEFORMS {
            let points: Vec<(f64, f64)> = self
                .summary
                .iter()
                .filter(|s| s.waveform == kind)
                .map(|s| (numeric[s.value], s.mean_rmse))
                .collect();
            if !points.is_empty() {
                series.push(Series {
                    name: kind.label().to_string(),
                    points,
                });
            }
        }
        PlotTable {
            title: title.to_string(),
            x_label: self.axis.label().to_string(),
            y_label: "mean RMSE".to_string(),
            series,
            provenance: provenance.to_string(),
            ..Default::default()
        }
    }
}

/// Fraction of runs with NRMSE below `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRow {
    pub mask: Vec<usize>,
    pub label: String,
    pub waveform: WaveformKind,
    pub n: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Success rate per `(mask, waveform)` from the rows of a mask sweep.
pub fn success_from_rows(masks: &[Vec<usize>], rows: &[SweepRow], threshold: f64) -> Result<Vec<SuccessRow>> {
    if !(threshold > 0.0) {
        return Err(Error::config("threshold", "must be positive"));
    }
    let mut out = Vec::new();
    for (i, mask) in masks.iter().enumerate() {
        for kind in WAVEFORMS {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.value == i && r.waveform == kind).collect();
            if group.is_empty() {
                continue;
            }
            let successes = group.iter().filter(|r| r.failure.is_none() && r.nrmse < threshold).count();
            out.push(SuccessRow {
                mask: mask.clone(),
                label: group[0].label.clone(),
                waveform: kind,
                n: group.len(),
                successes,
                rate: successes as f64 / group.len() as f64,
            });
        }
    }
    Ok(out)
}

/// Success rate for every observation mask of the base system.
pub fn success_rate(
    base: &RunConfig,
    threshold: f64,
    realizations: usize,
    waveforms: &[WaveformKind],
    master_seed: u64,
) -> Result<(SweepTable, Vec<SuccessRow>)> {
    let masks = enumerate_masks(base.system.dimension());
    let spec = SweepSpec {
        axis: SweepAxis::Mask,
        values: masks.iter().cloned().map(SweepValue::Mask).collect(),
        realizations,
        base: base.clone(),
        waveforms: waveforms.to_vec(),
    };
    let table = sweep(&spec, master_seed)?;
    let rates = success_from_rows(&masks, &table.rows, threshold)?;
    Ok((table, rates))
}

pub fn write_success(w: &mut impl Write, rates: &[SuccessRow], extra: &[(&str, &str)], header: bool) -> std::io::Result<()> {
    if header {
        let mut h: Vec<String> = extra.iter().map(|(k, _)| k.to_string()).collect();
        h.extend(["mask", "waveform", "n", "successes", "p_s"].map(String::from));
        format::write_row(w, &h)?;
    }
    for r in rates {
        let mut f: Vec<String> = extra.iter().map(|(_, v)| v.to_string()).collect();
        f.extend([
            r.label.clone(),
            r.waveform.label().to_string(),
            r.n.to_string(),
            r.successes.to_string(),
            format::num(r.rate),
        ]);
        format::write_row(w, &f)?;
    }
    Ok(())
}

pub fn success_plot(rates: &[SuccessRow], title: &str, provenance: &str) -> PlotTable {
    let mut categories: Vec<String> = Vec::new();
    for r in rates {
        if !categories.contains(&r.label) {
            categories.push(r.label.clone());
        }
    }
    let series = WAVEFORMS
        .iter()
        .map(|&kind| Series {
            name: kind.label().to_string(),
            points: rates
                .iter()
                .filter(|r| r.waveform == kind)
                .map(|r| (categories.iter().position(|c| c == &r.label).unwrap() as f64, r.rate))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    PlotTable {
        title: title.to_string(),
        x_label: "observed variables".to_string(),
        y_label: "success rate".to_string(),
        series,
        categories,
        provenance: provenance.to_string(),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    /// Measurement-noise and switching-interval sweeps.
    Robustness,
}

impl Figure {
    pub fn label(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Robustness => "robustness",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "robustness" => Ok(Figure::Robustness),
            _ => Err(Error::config("figure", format!("unknown figure `{s}` (fig2, fig3, fig4, robustness)"))),
        }
    }
}

/// Realization count and reservoir size of a reproduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub realizations: usize,
    pub reservoir_size: usize,
}

impl Profile {
    pub const FULL: Profile = Profile {
        realizations: DEFAULT_REALIZATIONS,
        reservoir_size: 500,
    };
    pub const FAST: Profile = Profile {
        realizations: 10,
        reservoir_size: 300,
    };
}

/// Tuned hyperparameters per tracked food-chain parameter (see `configs/`).
pub fn tuned_hyper(param: &str) -> ReservoirHyperparams<f64> {
    let (rho, s_in, alpha, d, s_b, beta) = match param {
        "K" => (0.728100986787177, 1.3175622429453122, 0.5157845166469917, 0.01697821538660325, 0.10336971511638837, 2.6677583802274402e-5),
        "y_c" => (0.4340592497583059, 1.2916290040543401, 0.39400622534348284, 0.0915014397373483, 1.7714867777472483, 4.601942584102741e-5),
        "y_p" => (0.7715566530896436, 1.2419997798786793, 0.2453754822015402, 0.03068962101357981, 1.9839647148091282, 1.4722180932615527e-7),
        _ => return ReservoirHyperparams::default(),
    };
    ReservoirHyperparams {
        spectral_radius: rho,
        input_scaling: s_in,
        leakage: alpha,
        density: d,
        bias_scaling: s_b,
        ridge: beta,
        ..Default::default()
    }
}

/// The three tracked parameters with the observation used for each.
pub const PANELS: [(&str, &[usize], WaveformKind); 3] = [
    ("K", &[0], WaveformKind::Am),
    ("y_c", &[0, 1], WaveformKind::Fm),
    ("y_p", &[1, 2], WaveformKind::Sawtooth),
];

/// Canonical food-chain run for one of [`PANELS`] under `profile`.
pub fn panel_config(param: &str, mask: &[usize], kind: WaveformKind, profile: Profile) -> RunConfig {
    let mut c = RunConfig::canonical(SystemKind::FoodChain, param, mask.to_vec(), kind);
    c.hyper = tuned_hyper(param);
    c.hyper.size = profile.reservoir_size;
    c
}

pub const SN_VALUES: [f64; 5] = [1.0, 2.0, 3.0, 5.0, 8.0];
pub const SW_VALUES: [f64; 5] = [1.0, 0.6, 0.3, 0.2, 0.1];
pub const NOISE_VALUES: [f64; 3] = [0.0, 0.01, 0.05];
pub const SWITCHING_VALUES: [f64; 3] = [25.0, 62.5, 125.0];

/// Files written by one reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn file(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        Ok(std::io::BufWriter::new(std::fs::File::create(p)?))
    }

    fn plot(&mut self, name: &str, table: &PlotTable, kind: PlotKind) -> Result<()> {
        let p = self.dir.join(name);
        render_plot(table, kind, &p)?;
        self.files.push(p);
        Ok(())
    }
}

/// Identity of a reproduction: hashes the figure, profile and master seed
/// together with every base config it runs.
fn reproduction_hash(figure: Figure, profile: Profile, master_seed: u64) -> String {
    let configs: Vec<RunConfig> = PANELS
        .iter()
        .map(|(p, m, k)| panel_config(p, m, *k, profile))
        .collect();
    let doc = serde_json::json!({
        "figure": figure.label(),
        "profile": profile,
        "seed": master_seed,
        "configs": configs,
    });
    let h = Sha256::digest(serde_json::to_vec(&doc).expect("serializable"));
    crate::reservoir::hex(&h)[..16].to_string()
}

/// Run a figure's canonical experiments and write CSV tables, SVG plots and
/// a manifest under `outdir/<figure>/<hash>/`.
pub fn reproduce_figure(figure: Figure, outdir: &Path, master_seed: u64, profile: Profile) -> Result<Reproduction> {
    let hash = reproduction_hash(figure, profile, master_seed);
    let dir = outdir.join(figure.label()).join(&hash);
    std::fs::create_dir_all(&dir)?;
    let mut out = Outputs { dir: dir.clone(), files: Vec::new() };
    let fseed = seed::derive(master_seed, figure.label());
    let failures = match figure {
        Figure::Fig2 => fig2(&mut out, fseed, profile, &hash)?,
        Figure::Fig3 => fig3(&mut out, fseed, profile, &hash)?,
        Figure::Fig4 => fig4(&mut out, fseed, profile, &hash)?,
        Figure::Robustness => robustness(&mut out, fseed, profile, &hash)?,
    };
    let mut m = out.file("manifest.txt")?;
    writeln!(m, "experiment: {}", figure.label())?;
    writeln!(m, "hash: {hash}")?;
    writeln!(m, "master_seed: {master_seed}")?;
    writeln!(m, "code_version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(m, "realizations: {}", profile.realizations)?;
    writeln!(m, "reservoir_size: {}", profile.reservoir_size)?;
    for (p, mask, kind) in PANELS {
        let c = panel_config(p, mask, kind, profile);
        writeln!(m, "config {p}: {}", serde_json::to_string(&c).expect("serializable"))?;
    }
    writeln!(m, "failed_runs: {failures}")?;
    writeln!(m, "status: {}", if failures == 0 { "complete" } else { "partial" })?;
    for f in &out.files {
        if let Some(name) = f.file_name() {
            writeln!(m, "output: {}", name.to_string_lossy())?;
        }
    }
    m.flush()?;
    drop(m);
    Ok(Reproduction {
        dir,
        files: out.files,
        failures,
    })
}

fn fig2(out: &mut Outputs, fseed: u64, profile: Profile, hash: &str) -> Result<usize> {
    let results: Vec<_> = PANELS
        .par_iter()
        .enumerate()
        .map(|(i, &(param, mask, kind))| {
            let mut c = panel_config(param, mask, kind, profile);
            c.seed = seed::derive_indexed(fseed, "panel", i as u64);
            let run = |c: &RunConfig| -> Result<_> {
                let sources = TrainingSources::build(c)?;
                let tracker = train_with(c, &sources)?;
                let r = track_source(c, &tracker, &TestSource::build(c)?)?;
                Ok((sources.levels, r))
            };
            let res = run(&c);
            (i, c, res)
        })
        .collect();
    let mut summary = out.file("summary.csv")?;
    format::write_row(&mut summary, &["panel", "param", "mask", "waveform", "seed", "rmse", "nrmse", "status"].map(String::from))?;
    let mut failures = 0;
    for (i, c, res) in results {
        let (param, mask, kind) = PANELS[i];
        let label = mask_label(SystemKind::FoodChain, mask);
        let panel = ["a", "b", "c"][i];
        match res {
            Ok((levels, r)) => {
                let mut f = out.file(&format!("panel_{panel}_{param}.csv"))?;
                r.write_csv(&mut f)?;
                f.flush()?;
                format::write_row(
                    &mut summary,
                    &[panel.into(), param.into(), label.clone(), kind.label().into(), c.seed.to_string(), format::num(r.rmse), format::num(r.nrmse), "ok".into()],
                )?;
                let table = PlotTable {
                    title: format!("{param} ({}) observed via {label}", kind.label()),
                    x_label: "t".into(),
                    y_label: param.into(),
                    series: vec![
                        Series { name: "ground truth".into(), points: r.times.iter().copied().zip(r.truth.iter().copied()).collect() },
                        Series { name: "tracked".into(), points: r.times.iter().copied().zip(r.tracked.iter().copied()).collect() },
                    ],
                    levels,
                    provenance: format!("{hash} config {}", r.config_hash),
                    ..Default::default()
                };
                out.plot(&format!("panel_{panel}_{param}.svg"), &table, PlotKind::Overlay)?;
            }
            Err(e) => {
                failures += 1;
                format::write_row(
                    &mut summary,
                    &[panel.into(), param.into(), label, kind.label().into(), c.seed.to_string(), format::num(PENALTY), format::num(PENALTY), format!("failed: {}", e.to_string().replace(',', ";"))],
                )?;
            }
        }
    }
    summary.flush()?;
    Ok(failures)
}

fn fig3(out: &mut Outputs, fseed: u64, profile: Profile, hash: &str) -> Result<usize> {
    let mut rows = out.file("rows.csv")?;
    let mut summary = out.file("summary.csv")?;
    let mut failures = 0;
    let mut first = true;
    for (i, &(param, mask, kind)) in PANELS.iter().enumerate() {
        let base = panel_config(param, mask, kind, profile);
        for (axis, values) in [(SweepAxis::SN, &SN_VALUES), (SweepAxis::SW, &SW_VALUES)] {
            let spec = SweepSpec {
                axis,
                values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
                realizations: profile.realizations,
                base: base.clone(),
                waveforms: WAVEFORMS.to_vec(),
            };
            // realization seeds are shared across parameters and axes
            let table = sweep(&spec, seed::derive_indexed(fseed, "sweep", i as u64))?;
            failures += table.rows.iter().filter(|r| r.failure.is_some()).count();
            table.write_rows(&mut rows, &[("param", param)], first)?;
            table.write_summary(&mut summary, &[("param", param)], first)?;
            first = false;
            let plot = table.line_plot(values, &format!("{param}: RMSE vs {}", axis.label()), hash);
            out.plot(&format!("fig3_{param}_{}.svg", axis.label()), &plot, PlotKind::Line)?;
        }
    }
    rows.flush()?;
    summary.flush()?;
    Ok(failures)
}

fn fig4(out: &mut Outputs, fseed: u64, profile: Profile, hash: &str) -> Result<usize> {
    let mut rows = out.file("rows.csv")?;
    let mut summary = out.file("summary.csv")?;
    let mut failures = 0;
    for (i, &(param, mask, kind)) in PANELS.iter().enumerate() {
        let base = panel_config(param, mask, kind, profile);
        let (table, rates) = success_rate(&base, DEFAULT_THRESHOLD, profile.realizations, &WAVEFORMS, seed::derive_indexed(fseed, "masks", i as u64))?;
        failures += table.rows.iter().filter(|r| r.failure.is_some()).count();
        table.write_rows(&mut rows, &[("param", param)], i == 0)?;
        write_success(&mut summary, &rates, &[("param", param)], i == 0)?;
        let plot = success_plot(&rates, &format!("{param}: success rate (NRMSE < {})", DEFAULT_THRESHOLD), hash);
        out.plot(&format!("fig4_{param}.svg"), &plot, PlotKind::Bar)?;
    }
    rows.flush()?;
    summary.flush()?;
    Ok(failures)
}

fn robustness(out: &mut Outputs, fseed: u64, profile: Profile, hash: &str) -> Result<usize> {
    let mut rows = out.file("rows.csv")?;
    let mut summary = out.file("summary.csv")?;
    let (param, mask, kind) = PANELS[0];
    let base = panel_config(param, mask, kind, profile);
    let mut failures = 0;
    for (j, (axis, values)) in [(SweepAxis::MeasurementNoise, &NOISE_VALUES[..]), (SweepAxis::SwitchingInterval, &SWITCHING_VALUES[..])]
        .into_iter()
        .enumerate()
    {
        let spec = SweepSpec {
            axis,
            values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
            realizations: profile.realizations,
            base: base.clone(),
            waveforms: WAVEFORMS.to_vec(),
        };
        let table = sweep(&spec, seed::derive(fseed, "robustness"))?;
        failures += table.rows.iter().filter(|r| r.failure.is_some()).count();
        table.write_rows(&mut rows, &[("param", param)], j == 0)?;
        table.write_summary(&mut summary, &[("param", param)], j == 0)?;
        let plot = table.line_plot(values, &format!("{param}: RMSE vs {}", axis.label()), hash);
        out.plot(&format!("robustness_{}.svg", axis.label()), &plot, PlotKind::Line)?;
    }
    rows.flush()?;
    summary.flush()?;
    Ok(failures)
}

/// Run `f` on a pool capped at `jobs` workers (all cores when `None`).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::config("jobs", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::NumericDomain(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut c = panel_config("K", &[0], WaveformKind::Am, Profile { realizations: 1, reservoir_size: 40 });
        c.hyper.density = 0.1;
        c.train_duration = 20.0 * c.switching_interval;
        c.test_duration = 24.0 * c.switching_interval;
        c.transient_steps = 500;
        c
    }

    #[test]
    fn single_value_single_realization_is_one_run() {
        let base = tiny();
        let spec = SweepSpec {
            axis: SweepAxis::SN,
            values: vec![SweepValue::Number(5.0)],
            realizations: 1,
            base: base.clone(),
            waveforms: vec![WaveformKind::Am],
        };
        let t = sweep(&spec, 3).unwrap();
        assert_eq!(t.rows.len(), 1);
        let mut c = base.clone();
        c.seed = realization_seed(3, 0);
        let r = crate::pipeline::run_tracking(&c, &crate::pipeline::train_tracker(&c).unwrap()).unwrap();
        assert_eq!(t.rows[0].rmse, r.rmse);
        assert_eq!(t.summary[0].std_rmse, 0.0);
    }

    #[test]
    fn mask_sharing_matches_independent_runs() {
        let base = tiny();
        let masks = vec![vec![0], vec![1, 2]];
        let spec = SweepSpec {
            axis: SweepAxis::Mask,
            values: masks.iter().cloned().map(SweepValue::Mask).collect(),
            realizations: 2,
            base: base.clone(),
            waveforms: vec![WaveformKind::Fm, WaveformKind::Sawtooth],
        };
        let t = sweep(&spec, 8).unwrap();
        assert_eq!(t.rows.len(), 8);
        let row = t.rows.iter().find(|r| r.value == 1 && r.realization == 1 && r.waveform == WaveformKind::Sawtooth).unwrap();
        let mut c = base.clone();
        c.observation.mask = vec![1, 2];
        c.seed = realization_seed(8, 1);
        let tracker = crate::pipeline::train_tracker(&c).unwrap();
        let r = crate::pipeline::run_tracking(&c.with_waveform(WaveformKind::Sawtooth), &tracker).unwrap();
        assert_eq!(row.rmse, r.rmse);
        assert_eq!(row.label, "C+P");
    }

    #[test]
    fn failures_become_penalty_rows() {
        let mut base = tiny();
        base.dynamical_noise = 1e7; // blows through the divergence guard
        let spec = SweepSpec {
            axis: SweepAxis::SW,
            values: vec![SweepValue::Number(1.0)],
            realizations: 1,
            base,
            waveforms: vec![WaveformKind::Am],
        };
        let t = sweep(&spec, 1).unwrap();
        assert_eq!(t.rows.len(), 1);
        let r = &t.rows[0];
        assert!(r.failure.as_ref().unwrap().contains("diverge"), "{:?}", r.failure);
        assert_eq!((r.rmse, r.nrmse), (PENALTY, PENALTY));
        assert_eq!(t.summary[0].failures, 1);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let spec = SweepSpec {
            axis: SweepAxis::SN,
            values: vec![SweepValue::Number(2.5)],
            realizations: 1,
            base: tiny(),
            waveforms: vec![WaveformKind::Am],
        };
        assert!(sweep(&spec, 0).unwrap_err().is_config());
        let mut s = spec.clone();
        s.values.clear();
        assert!(s.validate().unwrap_err().is_config());
        s.values = vec![SweepValue::Number(3.0)];
        s.realizations = 0;
        assert!(s.validate().unwrap_err().is_config());
        s.realizations = 1;
        s.waveforms = vec![WaveformKind::Constant];
        assert!(s.validate().unwrap_err().is_config());
    }

    fn rows_with(nrmse: &[f64]) -> Vec<SweepRow> {
        nrmse
            .iter()
            .enumerate()
            .map(|(i, &n)| SweepRow {
                value: 0,
                label: "R".into(),
                realization: i,
                seed: i as u64,
                waveform: WaveformKind::Fm,
                rmse: n,
                nrmse: n,
                failure: None,
            })
            .collect()
    }

    #[test]
    fn success_thresholds() {
        let rows = rows_with(&[0.05, 0.2, 0.01, 3.0]);
        let masks = vec![vec![0]];
        assert_eq!(success_from_rows(&masks, &rows, 0.1).unwrap()[0].rate, 0.5);
        assert_eq!(success_from_rows(&masks, &rows, f64::INFINITY).unwrap()[0].rate, 1.0);
        assert_eq!(success_from_rows(&masks, &rows, f64::MIN_POSITIVE).unwrap()[0].rate, 0.0);
        assert!(success_from_rows(&masks, &rows, 0.0).is_err());
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn figure_ids() {
        assert_eq!(Figure::parse("fig3").unwrap(), Figure::Fig3);
        assert!(Figure::parse("fig9").unwrap_err().is_config());
        assert_ne!(reproduction_hash(Figure::Fig2, Profile::FAST, 1), reproduction_hash(Figure::Fig2, Profile::FAST, 2));
        assert_ne!(reproduction_hash(Figure::Fig2, Profile::FAST, 1), reproduction_hash(Figure::Fig2, Profile::FULL, 1));
    }

    #[test]
    fn jobs_must_be_positive() {
        assert!(with_jobs(Some(0), || 1).is_err());
        assert_eq!(with_jobs(Some(1), || 2).unwrap(), 2);
    }
}
