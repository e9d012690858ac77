//! Config key reference shown by `--help`. Each table lists every key of a
//! subcommand's JSON document with its unit or allowed values.

pub type Keys = &'static [(&'static str, &'static str)];

pub const SYSTEM: Keys = &[
    ("system.name", "foodchain | rossler | mackeyglass"),
    (
        "system.fixed_params.<name>",
        "model constants, dimensionless; food chain K x_c y_c x_p y_p R_0 C_0, Rossler a b c, Mackey-Glass beta gamma n tau (tau in time units)",
    ),
    ("system.tracked_param", "name of the time-varying constant (food chain: K, y_c or y_p)"),
    ("system.dt", "integration step, time units"),
];

pub const WAVEFORM_FIELDS: Keys = &[
    ("kind", "constant | piecewise_constant | fm | am | sawtooth"),
    ("base", "nominal parameter value, parameter units"),
    ("amplitude", "parameter units (peak excursion for fm and sawtooth, carrier amplitude for am)"),
    ("carrier_period", "time units (the sawtooth period)"),
    ("modulation_period", "time units"),
    ("modulation_depth", "dimensionless, fm and am only"),
    ("schedule", "piecewise_constant only: list of {value: parameter units, duration: time units}"),
];

pub const RUN: Keys = &[
    ("observation.mask", "observed state indices, 0-based (food chain R=0 C=1 P=2)"),
    ("observation.sampling_interval", "time units, a multiple of system.dt"),
    ("observation.measurement_noise", "noise std as a fraction of each component's std"),
    ("observation.seed", "integer, extra index for the measurement-noise stream"),
    ("hyper.size", "reservoir units"),
    ("hyper.spectral_radius", "dimensionless"),
    ("hyper.input_scaling", "dimensionless, multiplies standardized inputs"),
    ("hyper.leakage", "leak rate in (0, 1]"),
    ("hyper.density", "fraction of nonzero recurrent weights"),
    ("hyper.bias_scaling", "dimensionless"),
    ("hyper.ridge", "ridge penalty, dimensionless"),
    ("hyper.washout", "samples discarded before training and scoring"),
    ("s_n", "number of training levels"),
    ("s_w", "fraction of the test excursion spanned by the training levels, in (0, 1]"),
    ("switching_interval", "time units between training level switches"),
    ("train_duration", "time units"),
    ("test_waveform.<field>", "test parameter signal, see the waveform fields below"),
    ("test_duration", "time units, at least train_duration"),
    ("ordering", "cyclic | random, order of training levels"),
    ("calibration", "affine | offset_only | none"),
    ("dynamical_noise", "additive noise intensity, state units per sqrt(time unit); per-step std is this times sqrt(dt)"),
    ("transient_steps", "integration steps discarded before recording"),
    ("seed", "master seed of the run"),
];

pub const SIMULATE: Keys = &[
    ("duration", "time units"),
    ("waveform.<field>", "parameter signal; absent means constant at the nominal value"),
    ("record_every", "store every n-th integration step"),
    ("dynamical_noise", "additive noise intensity, state units per sqrt(time unit); per-step std is this times sqrt(dt)"),
    ("transient_steps", "integration steps discarded before recording"),
    ("initial_state", "list of state values; absent means a seeded random start"),
    ("seed", "integer"),
];

pub const SWEEP: Keys = &[
    (
        "axis",
        "s_n | s_w | mask | measurement_noise | dynamical_noise | reservoir_size | train_duration | switching_interval",
    ),
    ("values", "list of axis values in the axis unit (masks are index lists)"),
    ("realizations", "seeded repetitions per value"),
    ("waveforms", "test waveforms tracked by each trained tracker: fm | sawtooth | am"),
    ("base.<key>", "the run configuration every point starts from; base.seed is the sweep master seed"),
];

pub const HYPEROPT: Keys = &[
    ("base.<key>", "the run configuration being tuned; base.seed seeds the search"),
    (
        "space.<name>.lo / .hi / .log",
        "bounds per tuned hyperparameter: spectral_radius input_scaling leakage density bias_scaling ridge",
    ),
    ("budget", "objective evaluations, at least 10"),
    ("validation_seeds", "validation runs averaged per evaluation"),
    ("method", "gp_ei | random"),
];

fn section(out: &mut String, title: &str, prefix: &str, keys: Keys) {
    if !title.is_empty() {
        out.push('\n');
        out.push_str(title);
        out.push('\n');
    }
    for (k, v) in keys {
        out.push_str(&format!("  {prefix}{k:<34} {v}\n"));
    }
}

fn run_sections(out: &mut String, prefix: &str) {
    section(out, "Run config keys:", prefix, SYSTEM);
    section(out, "", prefix, RUN);
    section(out, "Waveform fields:", &format!("{prefix}test_waveform."), WAVEFORM_FIELDS);
}

pub fn run_config() -> String {
    let mut s = String::new();
    run_sections(&mut s, "");
    s
}

/// Every key line, without titles, for checking coverage.
#[cfg(test)]
pub fn all() -> String {
    [run_config(), simulate(), sweep(), hyperopt()].concat()
}

pub fn simulate() -> String {
    let mut s = String::new();
    section(&mut s, "Simulation config keys:", "", SYSTEM);
    section(&mut s, "", "", SIMULATE);
    section(&mut s, "Waveform fields:", "waveform.", WAVEFORM_FIELDS);
    s
}

pub fn sweep() -> String {
    let mut s = String::new();
    section(&mut s, "Sweep config keys:", "", SWEEP);
    run_sections(&mut s, "base.");
    s
}

pub fn hyperopt() -> String {
    let mut s = String::new();
    section(&mut s, "Hyperopt config keys:", "", HYPEROPT);
    run_sections(&mut s, "base.");
    s
}

pub const REPRODUCE: &str = "
Figures:
  fig2        tracking examples for K, y_c and y_p
  fig3        RMSE against s_n and s_w
  fig4        success rate per observation mask
  robustness  measurement noise and switching interval sweeps
Profiles: full (50 realizations, 500 units) or --fast (10 realizations, 300 units).
Output: <out>/<figure>/<hash>/ with rows.csv, summary.csv, *.svg and manifest.txt.";
