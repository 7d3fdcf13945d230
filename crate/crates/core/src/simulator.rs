//! Synthetic recorder logs with known per-application power draw.
//!
//! The battery holds `capacity_mah × nominal_voltage_mv / 1000` mWh when full
//! and is integrated exactly, piecewise between schedule events and sample
//! instants. While unplugged it drains at the baseline power plus the power of
//! every running app plus one Gaussian jitter term per sampling step; while
//! plugged in it gains a fixed [`CHARGE_POWER_MW`] until full.
//!
//! Jitter is drawn from a ChaCha8 stream seeded with `noise.seed`, mapped to a
//! standard normal by `rand_distr`'s ziggurat sampler. One draw is taken per
//! sampling step whether or not the noise is enabled, so changing `sigma_mw`
//! never shifts the stream.
//!
//! Emitted samples quantize the state of charge the way a fuel gauge does:
//! `level_pct = ⌊100 E / E_full⌋` and `charge_uah = round(E / V)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recorder::LogRecord;
use crate::sources::{AppSet, BatterySample, Health, Status};

pub const CHARGE_POWER_MW: f64 = 5000.0;
const SIM_TEMP_DC: i32 = 250;
// Absorbs accumulated rounding so that an exact 90.0% does not floor to 89.
const LEVEL_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    Start(String),
    Stop(String),
    PlugIn,
    PlugOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub t_s: f64,
    pub event: Event,
}

impl ScheduledEvent {
    pub fn new(t_s: f64, event: Event) -> Self {
        ScheduledEvent { t_s, event }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub sigma_mw: f64,
    pub seed: u64,
}

fn default_interval() -> u64 {
    60
}

fn default_initial_level() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub capacity_mah: f64,
    pub nominal_voltage_mv: u32,
    pub baseline_mw: f64,
    pub apps: BTreeMap<String, f64>,
    pub schedule: Vec<ScheduledEvent>,
    pub duration_s: u64,
    #[serde(default = "default_interval")]
    pub sample_interval_s: u64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default = "default_initial_level")]
    pub initial_level_pct: f64,
}

impl Scenario {
    pub fn energy_full_mwh(&self) -> f64 {
        self.capacity_mah * f64::from(self.nominal_voltage_mv) / 1000.0
    }

    /// Drain rate in percent per hour caused by a constant power draw.
    pub fn rate_pct_per_h(&self, power_mw: f64) -> f64 {
        power_mw / self.energy_full_mwh() * 100.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ScenarioInvalid(m));
        if !(self.capacity_mah.is_finite() && self.capacity_mah > 0.0) {
            return bad(format!("capacity_mah must be positive, got {}", self.capacity_mah));
        }
        if self.nominal_voltage_mv == 0 {
            return bad("nominal_voltage_mv must be positive".into());
        }
        if !(self.baseline_mw.is_finite() && self.baseline_mw >= 0.0) {
            return bad(format!("baseline_mw must be finite and non-negative, got {}", self.baseline_mw));
        }
        for (name, &p) in &self.apps {
            if name.trim().is_empty() || name.trim() != name {
                return bad(format!("invalid app name {name:?}"));
            }
            if !(p.is_finite() && p >= 0.0) {
                return bad(format!("power of {name:?} must be finite and non-negative, got {p}"));
            }
        }
        if self.duration_s == 0 {
            return bad("duration_s must be positive".into());
        }
        if self.sample_interval_s == 0 {
            return bad("sample_interval_s must be at least 1".into());
        }
        if !(self.noise.sigma_mw.is_finite() && self.noise.sigma_mw >= 0.0) {
            return bad(format!("sigma_mw must be finite and non-negative, got {}", self.noise.sigma_mw));
        }
        if !(self.initial_level_pct > 0.0 && self.initial_level_pct <= 100.0) {
            return bad(format!("initial_level_pct must be in (0, 100], got {}", self.initial_level_pct));
        }

        let mut running = BTreeSet::new();
        let mut plugged = false;
        let mut prev = 0.0;
        for (i, ev) in self.schedule.iter().enumerate() {
            if !(ev.t_s.is_finite() && ev.t_s >= 0.0 && ev.t_s <= self.duration_s as f64) {
                return bad(format!("event {i} at t={} outside [0, duration]", ev.t_s));
            }
            if ev.t_s < prev {
                return bad(format!("event {i} at t={} precedes t={prev}", ev.t_s));
            }
            prev = ev.t_s;
            match &ev.event {
                Event::Start(name) => {
                    if !self.apps.contains_key(name) {
                        return bad(format!("event {i} starts unknown app {name:?}"));
                    }
                    if !running.insert(name.as_str()) {
                        return bad(format!("event {i} starts {name:?} which is already running"));
                    }
                }
                Event::Stop(name) => {
                    if !running.remove(name.as_str()) {
                        return bad(format!("event {i} stops {name:?} which is not running"));
                    }
                }
                Event::PlugIn if plugged => return bad(format!("event {i} plugs in twice")),
                Event::PlugOut if !plugged => return bad(format!("event {i} unplugs while unplugged")),
                Event::PlugIn | Event::PlugOut => plugged = !plugged,
            }
        }
        Ok(())
    }
}

/// Simulated log together with the exact energy the quantized samples hide.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<LogRecord>,
    /// State of charge in mWh at each record.
    pub energy_mwh: Vec<f64>,
    /// Total energy drawn while unplugged.
    pub consumed_mwh: f64,
}

struct Battery {
    energy: f64,
    full: f64,
    consumed: f64,
}

impl Battery {
    fn advance(&mut self, dt_s: f64, plugged: bool, load_mw: f64) {
        if dt_s <= 0.0 {
            return;
        }
        if plugged {
            self.energy = (self.energy + CHARGE_POWER_MW * dt_s / 3600.0).min(self.full);
        } else {
            let used = load_mw * dt_s / 3600.0;
            self.consumed += used;
            self.energy = (self.energy - used).max(0.0);
        }
    }
}

fn apply<'a>(ev: &'a Event, running: &mut BTreeSet<&'a str>, plugged: &mut bool) {
    match ev {
        Event::Start(n) => {
            running.insert(n.as_str());
        }
        Event::Stop(n) => {
            running.remove(n.as_str());
        }
        Event::PlugIn => *plugged = true,
        Event::PlugOut => *plugged = false,
    }
}

pub fn simulate(scenario: &Scenario) -> Result<Vec<LogRecord>, SimError> {
    simulate_trace(scenario).map(|t| t.records)
}

pub fn simulate_trace(scenario: &Scenario) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    let full = scenario.energy_full_mwh();
    let voltage = f64::from(scenario.nominal_voltage_mv);
    let step = scenario.sample_interval_s as f64;
    let n_samples = scenario.duration_s / scenario.sample_interval_s + 1;

    let mut battery = Battery { energy: scenario.initial_level_pct / 100.0 * full, full, consumed: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise.seed);
    let mut running: BTreeSet<&str> = BTreeSet::new();
    let mut plugged = false;
    let mut events = scenario.schedule.iter().peekable();

    let app_load = |running: &BTreeSet<&str>| -> f64 {
        scenario.baseline_mw + running.iter().map(|n| scenario.apps[*n]).sum::<f64>()
    };

    let mut records = Vec::with_capacity(n_samples as usize);
    let mut energy_mwh = Vec::with_capacity(n_samples as usize);

    for k in 0..n_samples {
        let t = k as f64 * step;
        while let Some(ev) = events.next_if(|e| e.t_s <= t) {
            apply(&ev.event, &mut running, &mut plugged);
        }

        let status = match (plugged, battery.energy >= full) {
            (false, _) => Status::Discharging,
            (true, true) => Status::Full,
            (true, false) => Status::Charging,
        };
        let level = (100.0 * battery.energy / full + LEVEL_EPS).floor().clamp(0.0, 100.0) as u8;
        records.push(LogRecord {
            sample: BatterySample {
                ts_ms: (k * scenario.sample_interval_s * 1000) as i64,
                level_pct: level,
                voltage_mv: scenario.nominal_voltage_mv,
                temp_dc: SIM_TEMP_DC,
                charge_uah: Some((battery.energy * 1e6 / voltage).round() as u64),
                status,
                health: Health::Good,
            },
            apps: AppSet::from_names(running.iter()),
        });
        energy_mwh.push(battery.energy);

        if k + 1 == n_samples {
            break;
        }
        let jitter: f64 = StandardNormal.sample(&mut rng);
        let jitter = jitter * scenario.noise.sigma_mw;
        let next = t + step;
        let mut cur = t;
        while let Some(ev) = events.next_if(|e| e.t_s < next) {
            battery.advance(ev.t_s - cur, plugged, app_load(&running) + jitter);
            apply(&ev.event, &mut running, &mut plugged);
            cur = ev.t_s;
        }
        battery.advance(next - cur, plugged, app_load(&running) + jitter);
    }

    Ok(SimTrace { records, energy_mwh, consumed_mwh: battery.consumed })
}

pub const BUILTIN_APPS: [&str; 5] = ["file download", "video streaming", "play games", "web browsing", "text message"];

/// Five-task workload: an idle segment, each task alone, then three
/// overlapping pairs, 20 minutes each, sampled once per minute.
pub fn builtin_scenario() -> Scenario {
    const POWERS_MW: [f64; 5] = [1800.0, 1400.0, 1100.0, 700.0, 300.0];
    const SEGMENT_S: f64 = 1200.0;
    let segments: [&[usize]; 9] = [&[], &[0], &[1], &[2], &[3], &[4], &[0, 3], &[1, 4], &[2, 3]];

    let mut schedule = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let start = i as f64 * SEGMENT_S;
        for &a in seg.iter() {
            schedule.push(ScheduledEvent::new(start, Event::Start(BUILTIN_APPS[a].to_string())));
        }
        for &a in seg.iter() {
            schedule.push(ScheduledEvent::new(start + SEGMENT_S, Event::Stop(BUILTIN_APPS[a].to_string())));
        }
    }
    schedule.sort_by(|a, b| a.t_s.total_cmp(&b.t_s).then_with(|| stop_first(&a.event, &b.event)));

    Scenario {
        capacity_mah: 3000.0,
        nominal_voltage_mv: 3850,
        baseline_mw: 250.0,
        apps: BUILTIN_APPS.iter().map(|n| n.to_string()).zip(POWERS_MW).collect(),
        schedule,
        duration_s: (segments.len() as f64 * SEGMENT_S) as u64,
        sample_interval_s: 60,
        noise: Noise::default(),
        initial_level_pct: 100.0,
    }
}

fn stop_first(a: &Event, b: &Event) -> std::cmp::Ordering {
    let rank = |e: &Event| match e {
        Event::Stop(_) | Event::PlugOut => 0,
        _ => 1,
    };
    rank(a).cmp(&rank(b))
}
