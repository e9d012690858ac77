//! The checked-in `configs/` tree: one document per canonical experiment.
//!
//! `PARAMTRACK_BLESS=1 cargo test -p paramtrack-cli configs` rewrites the
//! files from the built-in defaults.

use std::path::{Path, PathBuf};

use paramtrack::dynamics::SystemKind;
use paramtrack::harness::{
    mask_label, panel_config, Profile, SweepAxis, SweepSpec, SweepValue, DEFAULT_REALIZATIONS, NOISE_VALUES, PANELS,
    SN_VALUES, SWITCHING_VALUES, SW_VALUES, WAVEFORMS,
};
use paramtrack::hyperopt::{Method, SearchSpace};
use paramtrack::observation::enumerate_masks;
use paramtrack::pipeline::RunConfig;
use serde_json::Value;

use crate::config::load;
use crate::docs::{self, HyperoptConfig, DEFAULT_SEED};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(i: usize) -> RunConfig {
    let (param, mask, kind) = PANELS[i];
    let mut c = panel_config(param, mask, kind, Profile::FULL);
    c.seed = DEFAULT_SEED;
    c
}

fn numbers(axis: SweepAxis, values: &[f64], base: RunConfig) -> SweepSpec {
    SweepSpec {
        axis,
        values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
        realizations: DEFAULT_REALIZATIONS,
        base,
        waveforms: WAVEFORMS.to_vec(),
    }
}

fn json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Kind (subcommand) and contents of every canonical document.
fn documents() -> Vec<(String, &'static str, Value)> {
    let mut docs = Vec::new();
    for (i, (param, mask, kind)) in PANELS.into_iter().enumerate() {
        let label = mask_label(SystemKind::FoodChain, mask);
        docs.push((format!("fig2/{param}_{label}_{}.json", kind.label()), "run", json(&run(i))));
        docs.push((format!("fig3/{param}_s_n.json"), "sweep", json(&numbers(SweepAxis::SN, &SN_VALUES, run(i)))));
        docs.push((format!("fig3/{param}_s_w.json"), "sweep", json(&numbers(SweepAxis::SW, &SW_VALUES, run(i)))));
        let masks = SweepSpec {
            axis: SweepAxis::Mask,
            values: enumerate_masks(3).into_iter().map(SweepValue::Mask).collect(),
            ..numbers(SweepAxis::Mask, &[], run(i))
        };
        docs.push((format!("fig4/{param}_masks.json"), "sweep", json(&masks)));
        let mut base = run(i);
        if param == "K" {
            // K was tuned at three levels, the fewest the s_n sweep calls enough.
            base.s_n = 3;
        }
        let opt = HyperoptConfig {
            base,
            space: SearchSpace::default(),
            budget: 80,
            validation_seeds: 3,
            method: Method::GpEi,
        };
        docs.push((format!("hyperopt/{param}.json"), "hyperopt", json(&opt)));
    }
    docs.push((
        "robustness/K_measurement_noise.json".into(),
        "sweep",
        json(&numbers(SweepAxis::MeasurementNoise, &NOISE_VALUES, run(0))),
    ));
    docs.push((
        "robustness/K_switching_interval.json".into(),
        "sweep",
        json(&numbers(SweepAxis::SwitchingInterval, &SWITCHING_VALUES, run(0))),
    ));
    docs
}

#[test]
fn configs_match_the_built_in_defaults() {
    let docs = documents();
    if std::env::var_os("PARAMTRACK_BLESS").is_some() {
        for (name, _, v) in &docs {
            let p = root().join(name);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(&p, serde_json::to_string_pretty(v).unwrap() + "\n").unwrap();
        }
    }
    for (name, kind, want) in &docs {
        let p = root().join(name);
        let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}; rerun with PARAMTRACK_BLESS=1", p.display()));
        let got: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(&got, want, "{name} is stale; rerun with PARAMTRACK_BLESS=1");
        // Each file loads through the strict schema to exactly its contents.
        let loaded = match *kind {
            "run" => load(&docs::default_run(), Some(&p), &[]).map(|c: RunConfig| json(&c)),
            "sweep" => load(&docs::default_sweep(), Some(&p), &[]).map(|c: SweepSpec| json(&c)),
            _ => load(&docs::default_hyperopt(), Some(&p), &[]).map(|c: HyperoptConfig| json(&c)),
        };
        assert_eq!(&loaded.unwrap_or_else(|e| panic!("{name}: {e}")), want, "{name}");
    }
    let mut on_disk = Vec::new();
    for dir in std::fs::read_dir(root()).unwrap() {
        let dir = dir.unwrap().path();
        if dir.is_dir() {
            for f in std::fs::read_dir(&dir).unwrap() {
                let f = f.unwrap().path();
                on_disk.push(format!("{}/{}", dir.file_name().unwrap().to_string_lossy(), f.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    on_disk.sort();
    let mut listed: Vec<String> = docs.into_iter().map(|(n, _, _)| n).collect();
    listed.sort();
    assert_eq!(on_disk, listed, "configs/ holds files the defaults do not describe");
}
