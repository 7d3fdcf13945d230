//! Per-application drain rates from a recorder log.
//!
//! The log is cut into discharge intervals (consecutive samples that are both
//! `Discharging`). Each interval's drain rate is modeled as an always-on
//! baseline plus the sum of the rates of the applications active at the
//! interval's start. Rates are fitted with duration-weighted non-negative
//! least squares. Applications whose presence pattern is identical across all
//! intervals cannot be told apart and are fitted as one group; applications
//! present in every interval are folded into the baseline.

mod export;

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nnls::{self, Matrix, NnlsError, NnlsOptions};
use crate::recorder::LogRecord;
use crate::scalar::Scalar;
use crate::sources::{AppSet, Status};

pub use export::{export_records_csv, export_result_csv, write_records_csv, write_result_csv, ExportError};

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyzeError {
    #[error("too few usable samples: {usable} discharging records produced no discharge interval")]
    TooFewSamples { usable: usize },
    #[error("degenerate regression system")]
    DegenerateSystem,
    #[error("charge counter requested but missing on {missing} discharging records")]
    ChargeCounterUnavailable { missing: usize },
    #[error("solver failed: {0}")]
    Solver(NnlsError),
}

impl From<NnlsError> for AnalyzeError {
    fn from(e: NnlsError) -> Self {
        match e {
            NnlsError::DegenerateSystem => AnalyzeError::DegenerateSystem,
            other => AnalyzeError::Solver(other),
        }
    }
}

/// A span of battery-powered operation and its average drain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DischargeInterval {
    pub t_start_ms: i64,
    pub t_end_ms: i64,
    /// Summed duration of the constituent sample pairs. Equals
    /// `t_end − t_start` unless excluded spans were coalesced over.
    pub duration_h: f64,
    pub drop_pct: f64,
    pub rate_pct_per_h: f64,
    pub active: AppSet,
}

/// Whether drops are measured with the coulomb counter or the level percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeCounter {
    /// Use the counter on every sample pair that has it.
    #[default]
    Auto,
    /// Require the counter on every discharging sample.
    On,
    Off,
}

impl FromStr for ChargeCounter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ChargeCounter::Auto),
            "on" => Ok(ChargeCounter::On),
            "off" => Ok(ChargeCounter::Off),
            other => Err(format!("expected auto|on|off, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    pub charge_counter: ChargeCounter,
    pub nnls: NnlsOptions<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupFlag {
    /// Present in every discharge interval. The reported rate is the baseline
    /// rate, which includes this group's own drain.
    InseparableFromBaseline,
}

impl GroupFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupFlag::InseparableFromBaseline => "inseparable-from-baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRate {
    pub members: AppSet,
    pub rate_pct_per_h: f64,
    pub flags: Vec<GroupFlag>,
}

impl GroupRate {
    pub fn label(&self) -> String {
        self.members.label()
    }

    fn first_name(&self) -> &str {
        self.members.names().first().map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionResult {
    pub baseline_pct_per_h: f64,
    /// Ordered by smallest member name.
    pub groups: Vec<GroupRate>,
    pub unobserved: AppSet,
    pub residual_rms: f64,
    /// Indices into `groups`, by rate descending then smallest member name.
    pub ranking: Vec<usize>,
    pub intervals: usize,
    pub used_charge_counter: bool,
}

impl AttributionResult {
    pub fn ranked(&self) -> impl Iterator<Item = &GroupRate> {
        self.ranking.iter().map(|&i| &self.groups[i])
    }

    /// Rate of the group containing `app`, if it was observed.
    pub fn rate_of(&self, app: &str) -> Option<f64> {
        self.groups.iter().find(|g| g.members.contains(app)).map(|g| g.rate_pct_per_h)
    }
}

/// Percent-per-hour drain converted to milliwatts for a given battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate<T> {
    pub rate_pct_per_h: T,
    pub power_mw: T,
    pub capacity_mah: T,
    pub nominal_voltage_mv: T,
}

impl<T: Scalar> PowerEstimate<T> {
    pub fn new(rate_pct_per_h: T, capacity_mah: T, nominal_voltage_mv: T) -> Self {
        PowerEstimate {
            rate_pct_per_h,
            power_mw: rate_to_power(rate_pct_per_h, capacity_mah, nominal_voltage_mv),
            capacity_mah,
            nominal_voltage_mv,
        }
    }
}

/// `rate/100 × capacity_mah × voltage_mv/1000`.
pub fn rate_to_power<T: Scalar>(rate_pct_per_h: T, capacity_mah: T, nominal_voltage_mv: T) -> T {
    let hundred = T::lit(100.0);
    let thousand = T::lit(1000.0);
    rate_pct_per_h / hundred * capacity_mah * (nominal_voltage_mv / thousand)
}

/// Battery constants used to express rates as power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryConstants {
    pub capacity_mah: f64,
    pub nominal_voltage_mv: f64,
}

impl BatteryConstants {
    pub fn power_mw(&self, rate_pct_per_h: f64) -> f64 {
        rate_to_power(rate_pct_per_h, self.capacity_mah, self.nominal_voltage_mv)
    }
}

/// Charge (µAh) corresponding to a full battery, inferred from the
/// discharging samples.
///
/// Level is a floor of the true fraction, so every sample gives an upper
/// bound `charge × 100 / level`; the tightest one is used.
fn full_scale_uah(records: &[LogRecord]) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.sample.status == Status::Discharging && r.sample.level_pct > 0)
        .filter_map(|r| r.sample.charge_uah.map(|c| c as f64 * 100.0 / f64::from(r.sample.level_pct)))
        .filter(|f| *f > 0.0)
        .min_by(f64::total_cmp)
}

/// Cuts a ts-sorted log into discharge intervals.
///
/// Only pairs of consecutive `Discharging` samples are used. A pair whose
/// charge or level went up spans an unrecorded recharge and is dropped.
/// Consecutive retained intervals with the same active set are coalesced.
pub fn build_intervals(records: &[LogRecord], use_charge_counter: bool) -> Result<Vec<DischargeInterval>, AnalyzeError> {
    let full_scale = if use_charge_counter { full_scale_uah(records) } else { None };
    let mut out: Vec<DischargeInterval> = Vec::new();

    for pair in records.windows(2) {
        let (a, b) = (&pair[0].sample, &pair[1].sample);
        if a.status != Status::Discharging || b.status != Status::Discharging || b.ts_ms <= a.ts_ms {
            continue;
        }
        let drop_pct = match (full_scale, a.charge_uah, b.charge_uah) {
            (Some(full), Some(ca), Some(cb)) => (ca as f64 - cb as f64) / full * 100.0,
            _ => f64::from(a.level_pct) - f64::from(b.level_pct),
        };
        if drop_pct < 0.0 {
            continue;
        }
        let duration_h = (b.ts_ms - a.ts_ms) as f64 / MS_PER_HOUR;
        let active = &pair[0].apps;

        match out.last_mut() {
            Some(last) if last.active == *active => {
                last.t_end_ms = b.ts_ms;
                last.duration_h += duration_h;
                last.drop_pct += drop_pct;
            }
            _ => out.push(DischargeInterval {
                t_start_ms: a.ts_ms,
                t_end_ms: b.ts_ms,
                duration_h,
                drop_pct,
                rate_pct_per_h: 0.0,
                active: active.clone(),
            }),
        }
    }

    if out.is_empty() {
        let usable = records.iter().filter(|r| r.sample.status == Status::Discharging).count();
        return Err(AnalyzeError::TooFewSamples { usable });
    }
    for iv in &mut out {
        iv.rate_pct_per_h = iv.drop_pct / iv.duration_h;
    }
    Ok(out)
}

/// Regression columns after merging indistinguishable applications.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    /// Rows are intervals; column 0 is the baseline, column `g + 1` is group `g`.
    pub design: Matrix<f64>,
    /// Ordered by smallest member name.
    pub groups: Vec<AppSet>,
    /// Apps present in every interval, folded into the baseline column.
    pub inseparable: AppSet,
}

pub fn merge_identifiability_groups(intervals: &[DischargeInterval]) -> Grouping {
    let n = intervals.len();
    let words = n.div_ceil(64);
    let mut presence: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for (i, iv) in intervals.iter().enumerate() {
        for name in iv.active.iter() {
            presence.entry(name).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
        }
    }

    let mut full = vec![u64::MAX; words];
    if !n.is_multiple_of(64) {
        full[words - 1] = (1u64 << (n % 64)) - 1;
    }

    let mut inseparable = Vec::new();
    let mut by_pattern: BTreeMap<Vec<u64>, Vec<&str>> = BTreeMap::new();
    for (name, bits) in presence {
        if bits == full {
            inseparable.push(name);
        } else {
            by_pattern.entry(bits).or_default().push(name);
        }
    }

    let mut columns: Vec<(AppSet, Vec<u64>)> = by_pattern
        .into_iter()
        .map(|(bits, names)| (AppSet::from_names(names), bits))
        .collect();
    columns.sort_by(|a, b| a.0.names()[0].cmp(&b.0.names()[0]));

    let mut design = Matrix::zeros(n, columns.len() + 1);
    for i in 0..n {
        design.set(i, 0, 1.0);
    }
    for (g, (_, bits)) in columns.iter().enumerate() {
        for (w, &word) in bits.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros() as usize;
                design.set(w * 64 + b, g + 1, 1.0);
                word &= word - 1;
            }
        }
    }
    Grouping {
        design,
        groups: columns.into_iter().map(|(s, _)| s).collect(),
        inseparable: AppSet::from_names(inseparable),
    }
}

/// Weighted NNLS over interval rates, weights are durations in hours.
pub fn solve_rates(design: &Matrix<f64>, intervals: &[DischargeInterval], opts: &NnlsOptions<f64>) -> Result<nnls::NnlsSolution<f64>, AnalyzeError> {
    let y: Vec<f64> = intervals.iter().map(|iv| iv.rate_pct_per_h).collect();
    let w: Vec<f64> = intervals.iter().map(|iv| iv.duration_h).collect();
    Ok(nnls::solve_nnls_with(design, &y, &w, opts)?)
}

fn resolve_counter(records: &[LogRecord], mode: ChargeCounter) -> Result<bool, AnalyzeError> {
    match mode {
        ChargeCounter::Off => Ok(false),
        ChargeCounter::Auto => Ok(true),
        ChargeCounter::On => {
            let missing = records
                .iter()
                .filter(|r| r.sample.status == Status::Discharging && r.sample.charge_uah.is_none())
                .count();
            if missing > 0 {
                Err(AnalyzeError::ChargeCounterUnavailable { missing })
            } else {
                Ok(true)
            }
        }
    }
}

/// Full pipeline: intervals, grouping, fit, ranking.
pub fn attribute(records: &[LogRecord], options: &AnalyzeOptions) -> Result<AttributionResult, AnalyzeError> {
    let use_counter = resolve_counter(records, options.charge_counter)?;
    let intervals = build_intervals(records, use_counter)?;
    let grouping = merge_identifiability_groups(&intervals);
    let sol = solve_rates(&grouping.design, &intervals, &options.nnls)?;

    let total_h: f64 = intervals.iter().map(|iv| iv.duration_h).sum();
    let residual_rms = (sol.objective.max(0.0) / total_h).sqrt();
    let baseline = sol.coef[0];

    let mut groups: Vec<GroupRate> = grouping
        .groups
        .iter()
        .zip(&sol.coef[1..])
        .map(|(members, &rate)| GroupRate { members: members.clone(), rate_pct_per_h: rate, flags: Vec::new() })
        .collect();
    if !grouping.inseparable.is_empty() {
        groups.push(GroupRate {
            members: grouping.inseparable.clone(),
            rate_pct_per_h: baseline,
            flags: vec![GroupFlag::InseparableFromBaseline],
        });
        groups.sort_by(|a, b| a.first_name().cmp(b.first_name()));
    }

    let mut ranking: Vec<usize> = (0..groups.len()).collect();
    ranking.sort_by(|&a, &b| {
        let (ga, gb) = (&groups[a], &groups[b]);
        gb.rate_pct_per_h
            .total_cmp(&ga.rate_pct_per_h)
            .then_with(|| ga.first_name().cmp(gb.first_name()))
    });

    let observed: BTreeSet<&str> = intervals.iter().flat_map(|iv| iv.active.iter()).collect();
    let unobserved = AppSet::from_names(
        records
            .iter()
            .flat_map(|r| r.apps.iter())
            .filter(|name| !observed.contains(name))
            .collect::<BTreeSet<_>>(),
    );

    Ok(AttributionResult {
        baseline_pct_per_h: baseline,
        groups,
        unobserved,
        residual_rms,
        ranking,
        intervals: intervals.len(),
        used_charge_counter: use_counter,
    })
}
