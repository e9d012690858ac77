//! JSON documents read by the subcommands, with their built-in defaults.

use paramtrack::dynamics::{SystemKind, SystemSpec};
use paramtrack::harness::{panel_config, Profile, SweepAxis, SweepSpec, SweepValue, DEFAULT_REALIZATIONS, PANELS, SN_VALUES, WAVEFORMS};
use paramtrack::hyperopt::{Method, SearchSpace};
use paramtrack::pipeline::RunConfig;
use paramtrack::waveforms::WaveformSpec;
use serde::{Deserialize, Serialize};

/// Seed used when neither `--seed`, the environment nor the config sets one.
pub const DEFAULT_SEED: u64 = 2024;

/// Food-chain K tracked from R under the AM test waveform, with the tuned
/// hyperparameters.
pub fn default_run() -> RunConfig {
    let (param, mask, kind) = PANELS[0];
    let mut c = panel_config(param, mask, kind, Profile::FULL);
    c.seed = DEFAULT_SEED;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: SystemSpec<f64>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformSpec<f64>>,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub dynamical_noise: f64,
    #[serde(default)]
    pub transient_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl SimulateConfig {
    pub fn new(kind: SystemKind) -> Self {
        Self {
            system: SystemSpec::new(kind, kind.default_tracked()),
            duration: 1000.0,
            waveform: None,
            record_every: 1,
            dynamical_noise: 0.0,
            transient_steps: 0,
            initial_state: None,
            seed: DEFAULT_SEED,
        }
    }
}

pub fn default_sweep() -> SweepSpec {
    SweepSpec {
        axis: SweepAxis::SN,
        values: SN_VALUES.iter().map(|&v| SweepValue::Number(v)).collect(),
        realizations: DEFAULT_REALIZATIONS,
        base: default_run(),
        waveforms: WAVEFORMS.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperoptConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub space: SearchSpace,
    pub budget: usize,
    pub validation_seeds: usize,
    #[serde(default)]
    pub method: Method,
}

pub fn default_hyperopt() -> HyperoptConfig {
    HyperoptConfig {
        base: default_run(),
        space: SearchSpace::default(),
        budget: 60,
        validation_seeds: 3,
        method: Method::GpEi,
    }
}
