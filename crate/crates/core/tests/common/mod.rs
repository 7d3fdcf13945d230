#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semo_core::nnls::{weighted_objective, Matrix};
use semo_core::simulator::{Event, Noise, Scenario, ScheduledEvent};

/// Brute-force NNLS: solve the unconstrained weighted least squares problem on
/// every subset of columns and keep the best feasible candidate.
pub fn subset_oracle(x: &Matrix<f64>, y: &[f64], w: &[f64]) -> (Vec<f64>, f64) {
    let (m, n) = (x.nrows(), x.ncols());
    let mut best = (vec![0.0; n], weighted_objective(x, y, w, &vec![0.0; n]));
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let a = DMatrix::from_fn(m, cols.len(), |i, c| w[i].sqrt() * x.get(i, cols[c]));
        let b = DVector::from_fn(m, |i, _| w[i].sqrt() * y[i]);
        let Ok(sol) = a.svd(true, true).solve(&b, 1e-12) else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut beta = vec![0.0; n];
        for (c, &j) in cols.iter().enumerate() {
            beta[j] = sol[c];
        }
        let obj = weighted_objective(x, y, w, &beta);
        if obj < best.1 {
            best = (beta, obj);
        }
    }
    best
}

pub fn column_rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    m.rank(1e-9)
}

pub struct NnlsInstance {
    pub x: Matrix<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

/// Random instance with at most 3 columns and 8 rows. Odd seeds use 0/1
/// indicator designs with a leading all-ones column, even seeds dense reals.
pub fn random_nnls_instance(seed: u64) -> NnlsInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=8);
    let indicator = seed % 2 == 1;
    let x = Matrix::from_fn(m, n, |_, j| {
        if indicator {
            if j == 0 || rng.random_bool(0.5) {
                1.0
            } else {
                0.0
            }
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let y = (0..m).map(|_| rng.random_range(-5.0..10.0)).collect();
    let w = (0..m).map(|_| rng.random_range(0.05..2.0)).collect();
    NnlsInstance { x, y, w }
}

/// µAh drawn per minute by each unit of power in the exact-recovery scenarios.
/// With a 1000 mAh / 3700 mV battery, 0.222 mW drains exactly 1 µAh per minute.
pub const POWER_QUANTUM_MW: f64 = 0.222;

pub struct ExactCase {
    pub scenario: Scenario,
    /// Ground-truth rates in percent per hour.
    pub baseline_rate: f64,
    pub app_rates: BTreeMap<String, f64>,
}

fn schedule_from_segments(segments: &[(Vec<usize>, u64)], names: &[String]) -> (Vec<ScheduledEvent>, u64) {
    let mut schedule = Vec::new();
    let mut t = 0u64;
    let mut prev: Vec<usize> = Vec::new();
    for (active, len) in segments {
        for a in prev.iter().filter(|a| !active.contains(a)) {
            schedule.push(ScheduledEvent::new(t as f64, Event::Stop(names[*a].clone())));
        }
        for a in active.iter().filter(|a| !prev.contains(a)) {
            schedule.push(ScheduledEvent::new(t as f64, Event::Start(names[*a].clone())));
        }
        prev = active.clone();
        t += len;
    }
    (schedule, t)
}

/// Noise-free scenario with at most 5 apps and at most 40 sample pairs whose
/// segment design (baseline plus app indicators) has full column rank.
pub fn exact_recovery_case(seed: u64) -> ExactCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n_apps = rng.random_range(1..=5);
        let names: Vec<String> = (0..n_apps).map(|i| format!("app{i}")).collect();
        let mut segments: Vec<(Vec<usize>, u64)> = Vec::new();
        let mut pairs = 0;
        let target = rng.random_range((n_apps + 1) as u64..=40);
        while pairs < target {
            let active: Vec<usize> = (0..n_apps).filter(|_| rng.random_bool(0.4)).collect();
            let len = rng.random_range(1..=4u64).min(target - pairs);
            segments.push((active, len * 60));
            pairs += len;
        }
        let rows: Vec<Vec<f64>> = segments
            .iter()
            .map(|(a, _)| {
                std::iter::once(1.0)
                    .chain((0..n_apps).map(|j| if a.contains(&j) { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        if column_rank(&rows) != n_apps + 1 {
            continue;
        }

        let baseline_k = rng.random_range(50..500u32);
        let app_k: Vec<u32> = (0..n_apps).map(|_| rng.random_range(0..3000u32)).collect();
        let (schedule, duration) = schedule_from_segments(&segments, &names);
        let scenario = Scenario {
            capacity_mah: 1000.0,
            nominal_voltage_mv: 3700,
            baseline_mw: f64::from(baseline_k) * POWER_QUANTUM_MW,
            apps: names
                .iter()
                .zip(&app_k)
                .map(|(n, &k)| (n.clone(), f64::from(k) * POWER_QUANTUM_MW))
                .collect(),
            schedule,
            duration_s: duration,
            sample_interval_s: 60,
            noise: Noise::default(),
            initial_level_pct: 100.0,
        };
        return ExactCase {
            baseline_rate: f64::from(baseline_k) * 0.006,
            app_rates: names.iter().zip(&app_k).map(|(n, &k)| (n.clone(), f64::from(k) * 0.006)).collect(),
            scenario,
        };
    }
}

/// Eight hours of the five-task workload, 20-minute segments cycling through
/// idle, solo and paired use, with jitter at 5% of the mean load.
pub fn noisy_eight_hour_scenario(seed: u64) -> Scenario {
    let base = semo_core::simulator::builtin_scenario();
    let names: Vec<String> = semo_core::simulator::BUILTIN_APPS.iter().map(|s| s.to_string()).collect();
    let cycle: [Vec<usize>; 9] = [vec![], vec![0], vec![1], vec![2], vec![3], vec![4], vec![0, 3], vec![1, 4], vec![2, 3]];
    let segments: Vec<(Vec<usize>, u64)> = (0..24).map(|i| (cycle[i % 9].clone(), 1200)).collect();
    let (schedule, duration) = schedule_from_segments(&segments, &names);

    let power = |seg: &[usize]| base.baseline_mw + seg.iter().map(|&a| base.apps[&names[a]]).sum::<f64>();
    let mean_mw = segments.iter().map(|(a, _)| power(a)).sum::<f64>() / segments.len() as f64;

    Scenario {
        capacity_mah: 5000.0,
        schedule,
        duration_s: duration,
        noise: Noise { sigma_mw: 0.05 * mean_mw, seed },
        ..base
    }
}

/// Like the five-task workload but with a 40-minute charging stop in the
/// middle, starting from 80%.
pub fn scenario_with_charging() -> Scenario {
    let mut s = semo_core::simulator::builtin_scenario();
    s.initial_level_pct = 80.0;
    let pos = s.schedule.iter().position(|e| e.t_s > 3000.0).unwrap();
    s.schedule.insert(pos, ScheduledEvent::new(3000.0, Event::PlugIn));
    let pos = s.schedule.iter().position(|e| e.t_s > 5400.0).unwrap();
    s.schedule.insert(pos, ScheduledEvent::new(5400.0, Event::PlugOut));
    s.noise = Noise { sigma_mw: 40.0, seed: 11 };
    s
}

/// Large log for timing: `apps` apps with one random start or stop per minute.
pub fn big_scenario(samples: u64, apps: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..apps).map(|i| format!("app{i:02}")).collect();
    let mut running = vec![false; apps];
    let mut schedule = Vec::new();
    for minute in 1..samples {
        let a = rng.random_range(0..apps);
        let ev = if running[a] { Event::Stop(names[a].clone()) } else { Event::Start(names[a].clone()) };
        running[a] = !running[a];
        schedule.push(ScheduledEvent::new((minute * 60) as f64, ev));
    }
    Scenario {
        capacity_mah: 1_000_000.0,
        nominal_voltage_mv: 3850,
        baseline_mw: 300.0,
        apps: names.iter().enumerate().map(|(i, n)| (n.clone(), 20.0 * (i + 1) as f64)).collect(),
        schedule,
        duration_s: (samples - 1) * 60,
        sample_interval_s: 60,
        noise: Noise { sigma_mw: 10.0, seed },
        initial_level_pct: 100.0,
    }
}
