mod config;
#[cfg(test)]
mod configs;
mod docs;
mod help;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paramtrack::dynamics::{integrate_with, IntegrateOptions, StateVector, SystemKind};
use paramtrack::error::{Error, Result};
use paramtrack::format;
use paramtrack::harness::plot::{render_plot, PlotKind};
use paramtrack::harness::{self, Figure, Profile, SweepAxis, SweepSpec, SweepValue};
use paramtrack::hyperopt;
use paramtrack::pipeline::{self, RunConfig, TrainingSources};
use paramtrack::reservoir::{read_bundle, write_bundle, TrainedTracker};
use paramtrack::waveforms::WaveformSpec;
use serde::de::DeserializeOwned;
use serde::Serialize;

use docs::{HyperoptConfig, SimulateConfig};

#[derive(Parser)]
#[command(
    name = "paramtrack",
    version,
    about = "Track slowly varying parameters of chaotic systems from partial observations with a reservoir computer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every config-driven subcommand.
#[derive(Args)]
struct Common {
    /// JSON config merged over the built-in defaults
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set hyper.size=300 or --set observation.mask=[0,1]
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Master seed; beats the config. Defaults to 2024 when nothing sets it
    #[arg(long, env = "PARAMTRACK_SEED")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker thread cap (all cores by default)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a benchmark system and write its trajectory (t plus one column per state)
    #[command(after_help = help::simulate())]
    Simulate {
        /// foodchain, rossler or mackeyglass; replaces the default system
        #[arg(long, value_parser = parse_system)]
        system: Option<SystemKind>,
        /// Integration time, time units
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and calibrate a tracker and save it as a bundle
    #[command(after_help = help::run_config())]
    Train {
        /// Bundle path [default: <out>/tracker.ptrk]
        #[arg(long, value_name = "FILE")]
        tracker: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Track the test waveform with a saved tracker and score it
    #[command(after_help = help::run_config())]
    Track {
        /// Tracker bundle written by `train`
        #[arg(long, value_name = "FILE")]
        tracker: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Refit the output calibration of a saved tracker at the config's extreme training levels
    #[command(after_help = help::run_config())]
    Calibrate {
        /// Tracker bundle to recalibrate
        #[arg(long, value_name = "FILE")]
        tracker: PathBuf,
        /// Where to write the recalibrated bundle [default: <out>/tracker_calibrated.ptrk]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run seeded realizations over one swept quantity
    #[command(after_help = help::sweep())]
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Tune the reservoir hyperparameters on a held-out validation waveform
    #[command(after_help = help::hyperopt())]
    Hyperopt {
        /// Objective evaluations; replaces the config's budget
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate the tables and plots of one figure
    #[command(after_help = help::REPRODUCE)]
    Reproduce {
        /// fig2, fig3, fig4 or robustness
        #[arg(long)]
        figure: String,
        /// 10 realizations and 300 reservoir units instead of 50 and 500
        #[arg(long)]
        fast: bool,
        /// Master seed [default: 2024]
        #[arg(long, env = "PARAMTRACK_SEED")]
        seed: Option<u64>,
        /// Output directory
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
        /// Worker thread cap (all cores by default)
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
}

fn parse_system(s: &str) -> std::result::Result<SystemKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown system `{s}` (expected foodchain, rossler or mackeyglass)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<String> {
    match command {
        Command::Simulate { system, duration, common } => {
            let defaults = SimulateConfig::new(system.unwrap_or(SystemKind::FoodChain));
            let mut c: SimulateConfig = load(&defaults, &common)?;
            if let Some(d) = duration {
                c.duration = d;
            }
            c.seed = common.seed.unwrap_or(c.seed);
            simulate(&c, &common.out)
        }
        Command::Train { tracker, common } => {
            let c = load_run(&common)?;
            let path = tracker.unwrap_or_else(|| common.out.join("tracker.ptrk"));
            harness::with_jobs(common.jobs, || train(&c, &path))?
        }
        Command::Track { tracker, common } => {
            let c = load_run(&common)?;
            let t = read_tracker(&tracker)?;
            let result = harness::with_jobs(common.jobs, || pipeline::run_tracking(&c, &t))??;
            let series = create(&common.out, "tracking.csv")?;
            write_with(&series, |w| result.write_csv(w))?;
            let summary = create(&common.out, "summary.csv")?;
            write_with(&summary, |w| result.write_summary(w))?;
            Ok(format!(
                "rmse={} nrmse={} -> {}",
                format::num(result.rmse),
                format::num(result.nrmse),
                series.display()
            ))
        }
        Command::Calibrate { tracker, output, common } => {
            let c = load_run(&common)?;
            let t = read_tracker(&tracker)?;
            let t = harness::with_jobs(common.jobs, || pipeline::recalibrate(&c, &t))??;
            let path = output.unwrap_or_else(|| common.out.join("tracker_calibrated.ptrk"));
            save_tracker(&t, &path)?;
            Ok(format!(
                "gain={} offset={} -> {}",
                format::num(t.calibration.gain),
                format::num(t.calibration.offset),
                path.display()
            ))
        }
        Command::Sweep { common } => {
            let mut spec: SweepSpec = load(&docs::default_sweep(), &common)?;
            spec.base.seed = common.seed.unwrap_or(spec.base.seed);
            harness::with_jobs(common.jobs, || sweep(&spec, &common.out))?
        }
        Command::Hyperopt { budget, common } => {
            let mut h: HyperoptConfig = load(&docs::default_hyperopt(), &common)?;
            h.base.seed = common.seed.unwrap_or(h.base.seed);
            h.budget = budget.unwrap_or(h.budget);
            harness::with_jobs(common.jobs, || tune(&h, &common.out))?
        }
        Command::Reproduce {
            figure,
            fast,
            seed,
            out,
            jobs,
        } => {
            let figure = Figure::parse(&figure)?;
            let profile = if fast { Profile::FAST } else { Profile::FULL };
            let seed = seed.unwrap_or(docs::DEFAULT_SEED);
            let r = harness::with_jobs(jobs, || harness::reproduce_figure(figure, &out, seed, profile))??;
            let mut line = format!("{} files -> {}", r.files.len(), r.dir.display());
            if r.failures > 0 {
                line.push_str(&format!(" ({} failed runs recorded as penalty rows)", r.failures));
            }
            Ok(line)
        }
    }
}

fn load<T: Serialize + DeserializeOwned>(defaults: &T, common: &Common) -> Result<T> {
    config::load(defaults, common.config.as_deref(), &common.set)
}

fn load_run(common: &Common) -> Result<RunConfig> {
    let mut c: RunConfig = load(&docs::default_run(), common)?;
    c.seed = common.seed.unwrap_or(c.seed);
    c.validate()?;
    Ok(c)
}

fn create(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_tracker(path: &Path) -> Result<TrainedTracker<f64>> {
    let file = File::open(path).map_err(|e| Error::config("--tracker", format!("{}: {e}", path.display())))?;
    read_bundle(&mut std::io::BufReader::new(file))
}

fn save_tracker(t: &TrainedTracker<f64>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_bundle(t, &mut w)?;
    w.flush()?;
    Ok(())
}

fn simulate(c: &SimulateConfig, out: &Path) -> Result<String> {
    let kind = c.system.name;
    let signal = c.waveform.clone().unwrap_or_else(|| WaveformSpec::constant(c.system.nominal_value()));
    let x0 = c.initial_state.clone().map(StateVector::new);
    let opts = IntegrateOptions {
        record_every: c.record_every,
        dynamical_noise: c.dynamical_noise,
        transient_steps: c.transient_steps,
    };
    let traj = integrate_with(&c.system, x0.as_ref(), &signal, c.duration, c.seed, &opts)?;
    let path = create(out, "trajectory.csv")?;
    write_with(&path, |w| {
        let mut header = vec!["t".to_string()];
        header.extend(kind.component_names().iter().map(|s| s.to_string()));
        format::write_row(w, &header)?;
        for i in 0..traj.len() {
            let mut row = vec![format::num(traj.time(i))];
            row.extend(traj.state(i).iter().map(|&v| format::num(v)));
            format::write_row(w, &row)?;
        }
        Ok(())
    })?;
    Ok(format!("{} samples -> {}", traj.len(), path.display()))
}

fn train(c: &RunConfig, path: &Path) -> Result<String> {
    let sources = TrainingSources::build(c)?;
    let t = pipeline::train_with(c, &sources)?;
    let (rmse, nrmse) = pipeline::training_error(c, &sources, &t)?;
    save_tracker(&t, path)?;
    Ok(format!(
        "training rmse={} nrmse={} -> {}",
        format::num(rmse),
        format::num(nrmse),
        path.display()
    ))
}

fn sweep(spec: &SweepSpec, out: &Path) -> Result<String> {
    let table = harness::sweep(spec, spec.base.seed)?;
    let rows = create(out, "rows.csv")?;
    write_with(&rows, |w| table.write_rows(w, &[], true))?;
    let summary = create(out, "summary.csv")?;
    write_with(&summary, |w| table.write_summary(w, &[], true))?;
    let numeric: Vec<f64> = spec
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            SweepValue::Number(x) if spec.axis != SweepAxis::Mask => *x,
            _ => i as f64,
        })
        .collect();
    let plot = table.line_plot(&numeric, &format!("RMSE vs {}", spec.axis.label()), &spec.base.fingerprint()[..16]);
    let svg = out.join(format!("sweep_{}.svg", spec.axis.label()));
    render_plot(&plot, PlotKind::Line, &svg)?;
    let failures = table.rows.iter().filter(|r| r.failure.is_some()).count();
    Ok(format!(
        "{} rows ({} failed) -> {}, {}, {}",
        table.rows.len(),
        failures,
        rows.display(),
        summary.display(),
        svg.display()
    ))
}

fn tune(h: &HyperoptConfig, out: &Path) -> Result<String> {
    let record = hyperopt::tune(&h.base, &h.space, h.budget, h.validation_seeds, h.base.seed, h.method)?;
    let csv = create(out, "record.csv")?;
    write_with(&csv, |w| record.write_csv(w))?;
    let best = out.join("best.json");
    let fragment = hyperopt::best_fragment(&record, &h.space, &h.base.hyper);
    std::fs::write(&best, serde_json::to_string_pretty(&fragment).expect("json") + "\n")?;
    Ok(format!(
        "best objective={} after {} evaluations -> {}, {}",
        format::num(record.best_value()),
        record.budget_used(),
        csv.display(),
        best.display()
    ))
}
