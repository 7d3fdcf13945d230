//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with its own harness so that the criteria execute sequentially in one
//! thread; the memory criterion relies on a process-wide allocation counter.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use semo_core::analyzer::{attribute, AnalyzeOptions};
use semo_core::clock::{SimClock, StopSignal};
use semo_core::inspector::{evaluate, InspectorConfig, WarningKind};
use semo_core::nnls::solve_nnls;
use semo_core::recorder::{load_log, run_loop, write_log, LogRecord, RecorderConfig};
use semo_core::simulator::{builtin_scenario, simulate, Scenario, BUILTIN_APPS};
use semo_core::sources::{BatterySample, FsSource, Health, ReplaySource, Status};

struct CountingAlloc;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

const EXACT_TOL: f64 = 1e-6;
const NOISY_REL_TOL: f64 = 0.15;
const NOISY_MIN_PASSES: usize = 95;
const ORACLE_TOL: f64 = 1e-9;
const TIME_LIMIT: Duration = Duration::from_secs(1);

fn c1_builtin_ranking() -> Outcome {
    let t = Instant::now();
    let scenario = builtin_scenario();
    let result = attribute(&simulate(&scenario).map_err(|e| e.to_string())?, &AnalyzeOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let ranked: Vec<String> = result.ranked().map(|g| g.label()).collect();
    let mut truth: Vec<&str> = BUILTIN_APPS.to_vec();
    truth.sort_by(|a, b| scenario.apps[*b].total_cmp(&scenario.apps[*a]));
    check(
        ranked.first().map(String::as_str) == Some("file download") && ranked == truth && elapsed < TIME_LIMIT,
        format!("ranking {ranked:?} in {elapsed:?}"),
        format!("ranking {ranked:?} (truth {truth:?}) in {elapsed:?}"),
    )
}

fn c2_exact_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let case = common::exact_recovery_case(1000 + seed);
        let n_apps = case.scenario.apps.len();
        let log = simulate(&case.scenario).map_err(|e| e.to_string())?;
        let r = attribute(&log, &AnalyzeOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        if r.intervals > 40 || n_apps > 5 {
            return Err(format!("seed {seed}: generator produced {} intervals, {n_apps} apps", r.intervals));
        }
        worst = worst.max((r.baseline_pct_per_h - case.baseline_rate).abs());
        for (name, want) in &case.app_rates {
            let got = r.rate_of(name).ok_or_else(|| format!("seed {seed}: {name} missing"))?;
            worst = worst.max((got - want).abs());
        }
    }
    check(worst <= EXACT_TOL, format!("100 scenarios, max abs error {worst:.2e}"), format!("max abs error {worst:.2e} > {EXACT_TOL:e}"))
}

fn noisy_trial(scenario: &Scenario) -> Result<bool, String> {
    let log = simulate(scenario).map_err(|e| e.to_string())?;
    let r = attribute(&log, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    for name in BUILTIN_APPS {
        let want = scenario.rate_pct_per_h(scenario.apps[name]);
        let got = r.rate_of(name).ok_or("group missing")?;
        ok &= (got - want).abs() <= NOISY_REL_TOL * want;
    }
    let ranked: Vec<String> = r.ranked().map(|g| g.label()).collect();
    Ok(ok && ranked == BUILTIN_APPS)
}

fn c3_noisy_recovery() -> Outcome {
    let mut passes = 0;
    for seed in 0..100 {
        if noisy_trial(&common::noisy_eight_hour_scenario(seed))? {
            passes += 1;
        }
    }
    check(
        passes >= NOISY_MIN_PASSES,
        format!("{passes}/100 trials within {}% and exact ranking", NOISY_REL_TOL * 100.0),
        format!("only {passes}/100 trials passed (need {NOISY_MIN_PASSES})"),
    )
}

fn c4_oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..1000 {
        let inst = common::random_nnls_instance(seed);
        let sol = solve_nnls(&inst.x, &inst.y, &inst.w).map_err(|e| format!("seed {seed}: {e}"))?;
        let (_, best) = common::subset_oracle(&inst.x, &inst.y, &inst.w);
        worst = worst.max((sol.objective - best).abs());
    }
    check(worst <= ORACLE_TOL, format!("1000 instances, max objective gap {worst:.2e}"), format!("objective gap {worst:.2e}"))
}

fn c5_inspector_threshold() -> Outcome {
    let sample = |level| BatterySample {
        ts_ms: 0,
        level_pct: level,
        voltage_mv: 3900,
        temp_dc: 310,
        charge_uah: None,
        status: Status::Discharging,
        health: Health::Good,
    };
    let cfg = InspectorConfig::default();
    let at14: Vec<WarningKind> = evaluate(&sample(14), &cfg).iter().map(|w| w.kind).collect();
    let at15 = evaluate(&sample(15), &cfg);
    check(
        at14 == [WarningKind::LowBattery] && at15.is_empty(),
        "level 14 -> LowBattery, level 15 -> none",
        format!("level 14 -> {at14:?}, level 15 -> {at15:?}"),
    )
}

fn write_fixture(root: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(root)?;
    for (f, v) in [
        ("capacity", "80"),
        ("voltage_now", "3900000"),
        ("temp", "310"),
        ("status", "Discharging"),
        ("health", "Good"),
        ("running_apps", "browser\ngame"),
    ] {
        std::fs::write(root.join(f), v)?;
    }
    Ok(())
}

fn c6_recorder() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = dir.path().join("src");
    write_fixture(&src).map_err(|e| e.to_string())?;

    let cfg = RecorderConfig::new(dir.path().join("a.jsonl"));
    if cfg.interval_s != 60 {
        return Err(format!("default interval {}", cfg.interval_s));
    }
    let run = |cfg: &RecorderConfig, horizon_ms| {
        run_loop(cfg, &mut FsSource::new(&src), &SimClock::with_horizon(0, horizon_ms), &StopSignal::new())
            .map_err(|e| e.to_string())
    };
    let five_min = run(&cfg, 300_000)?.written;
    let cfg1 = RecorderConfig { interval_s: 1, out_path: dir.path().join("b.jsonl") };
    let ten_s = run(&cfg1, 10_000)?.written;

    let log = simulate(&builtin_scenario()).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for name in ["r1.jsonl", "r2.jsonl"] {
        let cfg = RecorderConfig::new(dir.path().join(name));
        let clock = SimClock::with_horizon(0, 60_000 * (log.len() as i64 - 1));
        run_loop(&cfg, &mut ReplaySource::new(log.clone()), &clock, &StopSignal::new()).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&cfg.out_path).map_err(|e| e.to_string())?);
    }
    let rewritten = dir.path().join("r3.jsonl");
    write_log(&rewritten, &load_log(dir.path().join("r1.jsonl")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let round_trip = std::fs::read(&rewritten).map_err(|e| e.to_string())? == bytes[0];

    check(
        five_min == 6 && ten_s == 11 && bytes[0] == bytes[1] && round_trip,
        "interval 60 s; 6 records in 5 min, 11 in 10 s at 1 s; replay runs and round-trip byte-identical",
        format!("5 min -> {five_min}, 10 s -> {ten_s}, runs equal {}, round-trip {round_trip}", bytes[0] == bytes[1]),
    )
}

fn c7_charging_exclusion() -> Outcome {
    let log = simulate(&common::scenario_with_charging()).map_err(|e| e.to_string())?;
    let charging = log.iter().filter(|r| r.sample.status != Status::Discharging).count();
    let stripped: Vec<LogRecord> = log.iter().filter(|r| r.sample.status == Status::Discharging).cloned().collect();
    let a = attribute(&log, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let b = attribute(&stripped, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    check(
        charging > 0 && a == b,
        format!("identical results with and without {charging} charging samples"),
        format!("results differ ({charging} charging samples)"),
    )
}

fn c8_performance() -> Outcome {
    let log = simulate(&common::big_scenario(10_000, 50, 9)).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let r = attribute(&log, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let analyze = t.elapsed();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = dir.path().join("src");
    write_fixture(&src).map_err(|e| e.to_string())?;
    let mut peaks = Vec::new();
    for (i, ticks) in [500i64, 5000].into_iter().enumerate() {
        let cfg = RecorderConfig { interval_s: 1, out_path: dir.path().join(format!("m{i}.jsonl")) };
        let mut source = FsSource::new(&src);
        let clock = SimClock::with_horizon(0, (ticks - 1) * 1000);
        let stop = StopSignal::new();
        let before = LIVE.load(Ordering::SeqCst);
        PEAK.store(before, Ordering::SeqCst);
        let summary = run_loop(&cfg, &mut source, &clock, &stop).map_err(|e| e.to_string())?;
        if summary.written != ticks as u64 {
            return Err(format!("wrote {} of {ticks} records", summary.written));
        }
        peaks.push(PEAK.load(Ordering::SeqCst) - before);
    }
    let bounded = peaks[1] <= peaks[0] + 1024;
    check(
        analyze < TIME_LIMIT && r.groups.len() == 50 && bounded,
        format!("analyzed 10000 records / 50 apps in {analyze:?}; record-loop peak heap {} B at 500 ticks, {} B at 5000", peaks[0], peaks[1]),
        format!("analyze {analyze:?} ({} groups); loop peak heap {peaks:?}", r.groups.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 built-in scenario ranking", c1_builtin_ranking),
        ("2 exact recovery", c2_exact_recovery),
        ("3 noisy recovery", c3_noisy_recovery),
        ("4 nnls oracle equivalence", c4_oracle_equivalence),
        ("5 inspector threshold", c5_inspector_threshold),
        ("6 recorder defaults and determinism", c6_recorder),
        ("7 charging exclusion", c7_charging_exclusion),
        ("8 performance", c8_performance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
