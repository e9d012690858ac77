use paramtrack::dynamics::{integrate, integrate_with, IntegrateOptions, StateVector, SystemKind, SystemSpec};
use paramtrack::waveforms::WaveformSpec;
use proptest::prelude::*;

fn foodchain() -> SystemSpec<f64> {
    SystemSpec::foodchain("K")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn foodchain_stays_in_the_open_box(r in 0.1f64..1.0, c in 0.1f64..1.0, p in 0.1f64..1.0) {
        let x0 = StateVector::new(vec![r, c, p]);
        let opts = IntegrateOptions { record_every: 10, ..Default::default() };
        let traj = integrate_with(&foodchain(), Some(&x0), &WaveformSpec::constant(0.94), 1e4, 0, &opts).unwrap();
        let (lo, hi) = traj
            .flat_states()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        prop_assert!(lo > 0.0 && hi < 10.0, "range [{lo}, {hi}]");
    }

    #[test]
    fn identical_inputs_give_identical_trajectories(seed in any::<u64>(), sigma in 0.0f64..1e-2) {
        let w = WaveformSpec::sawtooth(0.94, 0.094, 50.0);
        let opts = IntegrateOptions { dynamical_noise: sigma, transient_steps: 100, ..Default::default() };
        let a = integrate_with(&foodchain(), None, &w, 20.0, seed, &opts).unwrap();
        let b = integrate_with(&foodchain(), None, &w, 20.0, seed, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Independent least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn mackey_glass_defaults_are_chaotic() {
    // Growth rate of the separation between two runs started 1e-12 apart,
    // fitted before it saturates: a positive slope is a positive largest
    // Lyapunov exponent.
    let sys = SystemSpec::<f64>::new(SystemKind::MackeyGlass, "tau");
    let w = WaveformSpec::constant(17.0);
    let opts = IntegrateOptions { record_every: 100, ..Default::default() };
    let base = integrate_with(&sys, Some(&StateVector::new(vec![1.2])), &w, 1000.0, 0, &opts).unwrap();
    let start = base.last_state().unwrap()[0];
    let mut rates = Vec::new();
    for k in 0..4 {
        let x = start + 0.05 * k as f64;
        let a = integrate_with(&sys, Some(&StateVector::new(vec![x])), &w, 2500.0, 0, &opts).unwrap();
        let b = integrate_with(&sys, Some(&StateVector::new(vec![x + 1e-12])), &w, 2500.0, 0, &opts).unwrap();
        let (ts, logs): (Vec<f64>, Vec<f64>) = (0..a.len())
            .filter(|&i| a.time(i) >= 300.0)
            .map(|i| (a.time(i), ((a.state(i)[0] - b.state(i)[0]).abs() + 1e-300).ln()))
            .unzip();
        // Windowed maxima smooth over the near-crossings of the two runs.
        let window = 50;
        let (wt, wl): (Vec<f64>, Vec<f64>) = ts
            .chunks(window)
            .zip(logs.chunks(window))
            .map(|(t, l)| (t[0], l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
            .unzip();
        let last = *wl.last().unwrap();
        assert!(last < (1e-2f64).ln(), "separation saturated ({last}); shorten the window");
        rates.push(slope(&wt, &wl));
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    println!("mackey-glass separation growth rates {rates:?}");
    assert!(mean > 0.0 && rates.iter().all(|&r| r > 0.0), "{rates:?}");
}

#[test]
fn foodchain_dominant_period_is_about_62_5() {
    let opts = IntegrateOptions { record_every: 250, transient_steps: 100_000, ..Default::default() };
    let n = 16_384;
    let traj = integrate_with(&foodchain(), None, &WaveformSpec::constant(0.94), n as f64 * 2.5, 11, &opts).unwrap();
    let r: Vec<f64> = (0..traj.len()).map(|i| traj.state(i)[0]).collect();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let span = r.len() as f64 * 2.5;
    // Direct periodogram over periods between 20 and 250 time units.
    let mut best = (0.0, 0.0);
    for k in (span / 250.0) as usize..=(span / 20.0) as usize {
        let f = k as f64 / span;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in r.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * f * j as f64 * 2.5;
            re += (v - mean) * phase.cos();
            im += (v - mean) * phase.sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (1.0 / f, power);
        }
    }
    println!("dominant food-chain period {}", best.0);
    assert!((best.0 - 62.5).abs() < 0.15 * 62.5, "period {}", best.0);
}

#[test]
fn default_trajectory_is_deterministic_across_calls() {
    let w = WaveformSpec::constant(0.94);
    let a = integrate(&foodchain(), None, &w, 100.0, 3).unwrap();
    let b = integrate(&foodchain(), None, &w, 100.0, 3).unwrap();
    let c = integrate(&foodchain(), None, &w, 100.0, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
