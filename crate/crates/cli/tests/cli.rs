use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_paramtrack"));
    c.env_remove("PARAMTRACK_SEED");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A run small enough to train in well under a second.
const TINY: &str = r#"{
  "hyper": {"size": 40, "density": 0.1},
  "train_duration": 1250.0,
  "test_duration": 1500.0,
  "transient_steps": 500
}"#;

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.json");
    std::fs::write(&p, TINY).unwrap();
    p.display().to_string()
}

#[test]
fn simulate_writes_state_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--system", "foodchain", "--duration", "1000"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,R,C,P"));
    assert_eq!(csv.lines().count(), 1 + 100_000);
    assert!(stdout(&o).contains("trajectory.csv"));
}

#[test]
fn seed_flag_env_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |extra: &[&str], env: Option<&str>, out: &str| {
        let mut args = vec!["simulate", "--duration", "50", "--out", out];
        args.extend_from_slice(extra);
        let mut c = bin();
        c.args(&args).current_dir(dir.path());
        if let Some(s) = env {
            c.env("PARAMTRACK_SEED", s);
        }
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("trajectory.csv")).unwrap()
    };
    let a = sim(&[], None, "a");
    assert_eq!(a, sim(&[], None, "a2"), "identical invocations differ");
    assert_eq!(a, sim(&["--seed", "2024"], None, "a3"), "documented default seed");
    let b = sim(&["--seed", "7"], None, "b");
    assert_ne!(a, b);
    assert_eq!(b, sim(&[], Some("7"), "b2"));
    assert_eq!(b, sim(&["--set", "seed=7"], None, "b3"));
    assert_eq!(a, sim(&["--seed", "2024"], Some("7"), "c"), "flag beats env");
    assert_eq!(b, sim(&["--set", "seed=3"], Some("7"), "d"), "env beats config");
}

#[test]
fn train_track_calibrate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["train", "--config", &cfg, "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("training rmse="), "{}", stdout(&o));
    let tracker = dir.path().join("out/tracker.ptrk");
    assert!(tracker.exists());

    let test = dir.path().join("test_fm.json");
    std::fs::write(
        &test,
        r#"{"hyper": {"size": 40, "density": 0.1}, "train_duration": 1250.0, "test_duration": 1500.0,
            "transient_steps": 500, "test_waveform": {"kind": "fm", "base": 0.94, "amplitude": 0.094,
            "carrier_period": 15625.0, "modulation_period": 62500.0, "modulation_depth": 0.5}}"#,
    )
    .unwrap();
    let t = tracker.display().to_string();
    let track = |out: &str| {
        let o = run(&["track", "--tracker", &t, "--config", &test.display().to_string(), "--seed", "5", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        o
    };
    let o = track("t1");
    let line = stdout(&o);
    assert!(line.starts_with("rmse=") && line.contains("nrmse="), "{line}");
    let csv = std::fs::read_to_string(dir.path().join("t1/tracking.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,p_true,o_tracked"));
    assert_eq!(csv.lines().count(), 1 + 600 - 100);
    let summary = std::fs::read_to_string(dir.path().join("t1/summary.csv")).unwrap();
    assert!(summary.starts_with("config_hash,seed,rmse,nrmse\n"));
    track("t2");
    assert_eq!(
        std::fs::read(dir.path().join("t1/tracking.csv")).unwrap(),
        std::fs::read(dir.path().join("t2/tracking.csv")).unwrap()
    );

    // Recalibrating with the training config reproduces the trained bundle.
    let o = run(&["calibrate", "--tracker", &t, "--config", &cfg, "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("gain="));
    assert_eq!(
        std::fs::read(&tracker).unwrap(),
        std::fs::read(dir.path().join("out/tracker_calibrated.ptrk")).unwrap()
    );

    // A tracker used with a different mask is a configuration error.
    let o = run(&["track", "--tracker", &t, "--config", &cfg, "--set", "observation.mask=[1]"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("observation.mask"));
}

#[test]
fn configuration_errors_exit_1_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--set", "hyper.radius=0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hyper.radius"), "{}", stderr(&o));
    let o = run(&["train", "--set", "s_w=2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`s_w`"), "{}", stderr(&o));
    let o = run(&["track", "--tracker", "missing.ptrk"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["reproduce", "--figure", "fig9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["simulate", "--system", "lorenz"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_exits_2_with_failure_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--duration", "100", "--set", "dynamical_noise=1e7"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged at t ="), "{}", stderr(&o));
}

#[test]
fn help_lists_config_keys_with_units() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["simulate", "train", "track", "calibrate", "sweep", "hyperopt", "reproduce"] {
        let o = run(&[sub, "--help"], dir.path());
        assert!(o.status.success());
        let text = stdout(&o);
        assert!(text.contains("--seed"), "{sub}");
        if sub != "reproduce" {
            assert!(text.contains("time units"), "{sub}");
            assert!(text.contains("system.dt"), "{sub}");
        }
    }
    let text = stdout(&run(&["train", "--help"], dir.path()));
    for key in ["hyper.ridge", "observation.sampling_interval", "test_waveform.carrier_period", "switching_interval"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn sweep_writes_tables_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!(r#"{{"axis": "s_n", "values": [1, 3], "realizations": 2, "waveforms": ["fm", "am"], "base": {TINY}}}"#);
    std::fs::write(dir.path().join("sweep.json"), spec).unwrap();
    let o = run(&["sweep", "--config", "sweep.json", "--jobs", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    assert!(rows.starts_with("axis,value,waveform,realization,seed,rmse,nrmse,status\n"));
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    assert!(dir.path().join("out/sweep_s_n.svg").exists());
}

#[test]
fn hyperopt_fragment_feeds_train() {
    let dir = tempfile::tempdir().unwrap();
    let doc = format!(r#"{{"budget": 10, "validation_seeds": 1, "method": "random", "base": {TINY}}}"#);
    std::fs::write(dir.path().join("opt.json"), doc).unwrap();
    let o = run(&["hyperopt", "--config", "opt.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let record = std::fs::read_to_string(dir.path().join("out/record.csv")).unwrap();
    assert!(record.starts_with("eval,spectral_radius,input_scaling,leakage,density,bias_scaling,ridge,objective,best\n"));
    assert_eq!(record.lines().count(), 11);
    let best: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/best.json")).unwrap()).unwrap();
    assert_eq!(best["hyper"]["size"], 40);
    // The fragment is a valid config layer.
    let o = run(
        &["train", "--config", "out/best.json", "--set", "train_duration=1250", "--set", "test_duration=1500", "--set", "transient_steps=500"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
}
