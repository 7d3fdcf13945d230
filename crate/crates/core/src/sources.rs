//! Battery readings and running-application lists.
//!
//! A source directory mimics the kernel power-supply class layout: one plain
//! text file per quantity, plus a `running_apps` listing with one name per
//! line.
//!
//! | file          | unit                 | required |
//! |---------------|----------------------|----------|
//! | `capacity`    | percent, 0..=100     | yes      |
//! | `voltage_now` | microvolts           | yes      |
//! | `temp`        | tenths of a degree C | yes      |
//! | `charge_now`  | microampere-hours    | no       |
//! | `status`      | text                 | yes      |
//! | `health`      | text                 | yes      |
//! | `running_apps`| names, one per line  | yes      |

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::recorder::LogRecord;

/// Environment variable overriding [`DEFAULT_SOURCE_ROOT`].
pub const SOURCE_ROOT_ENV: &str = "SEMO_SOURCE_ROOT";
pub const DEFAULT_SOURCE_ROOT: &str = "/sys/class/power_supply/BAT0";

pub const CAPACITY_FILE: &str = "capacity";
pub const VOLTAGE_FILE: &str = "voltage_now";
pub const TEMP_FILE: &str = "temp";
pub const CHARGE_FILE: &str = "charge_now";
pub const STATUS_FILE: &str = "status";
pub const HEALTH_FILE: &str = "health";
pub const APPS_FILE: &str = "running_apps";

/// Source directory from the environment, or the platform default.
pub fn default_source_root() -> PathBuf {
    std::env::var_os(SOURCE_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_SOURCE_ROOT))
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("missing field `{field}` ({})", path.display())]
    MissingField { field: &'static str, path: PathBuf },
    #[error("malformed field `{field}`: {reason}")]
    MalformedField { field: &'static str, reason: String },
    #[error("replay source exhausted after {0} records")]
    Exhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Charging,
    Discharging,
    Full,
    NotCharging,
    Unknown,
}

impl Status {
    /// Parses the kernel text form. Unlisted strings become `Unknown`.
    pub fn from_source_text(s: &str) -> Self {
        match s.trim() {
            "Charging" => Status::Charging,
            "Discharging" => Status::Discharging,
            "Full" => Status::Full,
            "Not charging" => Status::NotCharging,
            _ => Status::Unknown,
        }
    }

    pub fn source_text(self) -> &'static str {
        match self {
            Status::Charging => "Charging",
            Status::Discharging => "Discharging",
            Status::Full => "Full",
            Status::NotCharging => "Not charging",
            Status::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text().to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Health {
    Good,
    Overheat,
    Dead,
    OverVoltage,
    Cold,
    Unknown,
}

impl Health {
    pub fn from_source_text(s: &str) -> Self {
        match s.trim() {
            "Good" => Health::Good,
            "Overheat" => Health::Overheat,
            "Dead" => Health::Dead,
            "Over voltage" => Health::OverVoltage,
            "Cold" => Health::Cold,
            _ => Health::Unknown,
        }
    }

    pub fn source_text(self) -> &'static str {
        match self {
            Health::Good => "Good",
            Health::Overheat => "Overheat",
            Health::Dead => "Dead",
            Health::OverVoltage => "Over voltage",
            Health::Cold => "Cold",
            Health::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Health {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text().to_lowercase())
    }
}

/// One instantaneous battery reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatterySample {
    pub ts_ms: i64,
    pub level_pct: u8,
    pub voltage_mv: u32,
    /// Tenths of a degree Celsius.
    pub temp_dc: i32,
    pub charge_uah: Option<u64>,
    pub status: Status,
    pub health: Health,
}

impl BatterySample {
    /// Checks the value-level invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.level_pct > 100 {
            return Err(format!("level {} outside 0..=100", self.level_pct));
        }
        if self.voltage_mv == 0 && self.status != Status::Unknown {
            return Err("voltage must be positive unless status is unknown".into());
        }
        Ok(())
    }
}

/// Sorted, deduplicated set of non-empty application names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AppSet(Vec<String>);

impl AppSet {
    pub fn new() -> Self {
        AppSet(Vec::new())
    }

    /// Normalizing constructor: trims, drops empty names, sorts and dedups.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v: Vec<String> = names
            .into_iter()
            .map(|s| s.as_ref().trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        v.sort();
        v.dedup();
        AppSet(v)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.binary_search_by(|n| n.as_str().cmp(name)).is_ok()
    }

    pub fn union(&self, other: &AppSet) -> AppSet {
        AppSet::from_names(self.iter().chain(other.iter()))
    }

    /// Display label: members joined with `+`.
    pub fn label(&self) -> String {
        self.0.join("+")
    }
}

impl TryFrom<Vec<String>> for AppSet {
    type Error = String;

    /// Strict conversion: the input must already be in canonical form.
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        if v.iter().any(|s| s.is_empty()) {
            return Err("empty application name".into());
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err("application names must be sorted and unique".into());
        }
        Ok(AppSet(v))
    }
}

impl From<AppSet> for Vec<String> {
    fn from(s: AppSet) -> Self {
        s.0
    }
}

impl<S: AsRef<str>> FromIterator<S> for AppSet {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        AppSet::from_names(iter)
    }
}

fn read_field(root: &Path, field: &'static str) -> Result<String, SourceError> {
    let path = root.join(field);
    match std::fs::read_to_string(&path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(SourceError::MissingField { field, path }),
        Err(e) => Err(SourceError::MalformedField { field, reason: e.to_string() }),
    }
}

fn parse_int<T: std::str::FromStr>(field: &'static str, raw: &str) -> Result<T, SourceError> {
    let t = raw.trim();
    t.parse().map_err(|_| SourceError::MalformedField {
        field,
        reason: format!("expected an integer, got {t:?}"),
    })
}

/// Reads one battery sample from a power-supply style directory.
pub fn read_battery_sample(root: &Path, clock: &dyn Clock) -> Result<BatterySample, SourceError> {
    let level: i64 = parse_int(CAPACITY_FILE, &read_field(root, CAPACITY_FILE)?)?;
    if !(0..=100).contains(&level) {
        return Err(SourceError::MalformedField {
            field: CAPACITY_FILE,
            reason: format!("level {level} outside 0..=100"),
        });
    }
    let voltage_uv: i64 = parse_int(VOLTAGE_FILE, &read_field(root, VOLTAGE_FILE)?)?;
    let temp_dc: i32 = parse_int(TEMP_FILE, &read_field(root, TEMP_FILE)?)?;
    let status = Status::from_source_text(&read_field(root, STATUS_FILE)?);
    let health = Health::from_source_text(&read_field(root, HEALTH_FILE)?);
    let charge_uah = match read_field(root, CHARGE_FILE) {
        Ok(raw) => Some(parse_int::<u64>(CHARGE_FILE, &raw)?),
        Err(SourceError::MissingField { .. }) => None,
        Err(e) => return Err(e),
    };

    let voltage_mv = u32::try_from(voltage_uv / 1000).map_err(|_| SourceError::MalformedField {
        field: VOLTAGE_FILE,
        reason: format!("voltage {voltage_uv} uV out of range"),
    })?;
    if voltage_mv == 0 && status != Status::Unknown {
        return Err(SourceError::MalformedField {
            field: VOLTAGE_FILE,
            reason: "voltage must be positive".into(),
        });
    }

    Ok(BatterySample {
        ts_ms: clock.now_ms(),
        level_pct: level as u8,
        voltage_mv,
        temp_dc,
        charge_uah,
        status,
        health,
    })
}

/// Reads the running-application listing.
pub fn read_running_apps(root: &Path) -> Result<AppSet, SourceError> {
    let raw = read_field(root, APPS_FILE)?;
    Ok(AppSet::from_names(raw.lines()))
}

/// Anything the recorder can poll for a reading and the running apps.
///
/// `read_sample` is called first on each tick, then `read_apps`.
pub trait Source {
    fn read_sample(&mut self, clock: &dyn Clock) -> Result<BatterySample, SourceError>;
    fn read_apps(&mut self) -> Result<AppSet, SourceError>;
}

/// Live source backed by a directory of plain text files.
#[derive(Debug, Clone)]
pub struct FsSource {
    root: PathBuf,
}

impl FsSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FsSource { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Source for FsSource {
    fn read_sample(&mut self, clock: &dyn Clock) -> Result<BatterySample, SourceError> {
        read_battery_sample(&self.root, clock)
    }

    fn read_apps(&mut self) -> Result<AppSet, SourceError> {
        read_running_apps(&self.root)
    }
}

/// Plays back the readings of an existing log, one record per tick.
///
/// Timestamps come from the recorder's clock, not from the replayed records.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    records: Vec<LogRecord>,
    cursor: usize,
}

impl ReplaySource {
    pub fn new(records: Vec<LogRecord>) -> Self {
        ReplaySource { records, cursor: 0 }
    }
}

impl Source for ReplaySource {
    fn read_sample(&mut self, clock: &dyn Clock) -> Result<BatterySample, SourceError> {
        let rec = self
            .records
            .get(self.cursor)
            .ok_or(SourceError::Exhausted(self.records.len()))?;
        self.cursor += 1;
        Ok(BatterySample { ts_ms: clock.now_ms(), ..rec.sample.clone() })
    }

    fn read_apps(&mut self) -> Result<AppSet, SourceError> {
        match self.cursor.checked_sub(1).and_then(|i| self.records.get(i)) {
            Some(rec) => Ok(rec.apps.clone()),
            None => Err(SourceError::Exhausted(self.records.len())),
        }
    }
}
