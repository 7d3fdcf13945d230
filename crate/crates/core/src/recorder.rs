//! Periodic sampling into an append-only JSONL log, and curve extraction.
//!
//! Each line of a log is one record:
//!
//! ```text
//! {"ts_ms":0,"level_pct":80,"voltage_mv":3900,"temp_dc":310,"charge_uah":null,"status":"Discharging","health":"Good","apps":["browser","game"]}
//! ```
//!
//! Timestamps are strictly increasing within a log. One writer owns a log at a
//! time; that is enforced with an advisory lock on the file.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, StopSignal};
use crate::sources::{AppSet, BatterySample, Health, Source, SourceError, Status};

pub const DEFAULT_INTERVAL_S: u64 = 60;

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error("timestamp {ts_ms} not after previous record ({last_ms})")]
    NonMonotonicTimestamp { ts_ms: i64, last_ms: i64 },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("log {} is owned by another recorder", .0.display())]
    Locked(PathBuf),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("invalid recorder config: {0}")]
    Config(String),
}

impl RecorderError {
    fn io(context: impl Into<String>, source: io::Error) -> Self {
        RecorderError::Io { context: context.into(), source }
    }
}

/// One recorder row: a reading and the applications running at that instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub sample: BatterySample,
    pub apps: AppSet,
}

impl LogRecord {
    pub fn ts_ms(&self) -> i64 {
        self.sample.ts_ms
    }

    /// Serializes to one JSONL line without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&WireRecord::from(self)).expect("record serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let wire: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        LogRecord::try_from(wire)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    ts_ms: i64,
    level_pct: u8,
    voltage_mv: u32,
    temp_dc: i32,
    charge_uah: Option<u64>,
    status: Status,
    health: Health,
    apps: AppSet,
}

impl From<&LogRecord> for WireRecord {
    fn from(r: &LogRecord) -> Self {
        let s = &r.sample;
        WireRecord {
            ts_ms: s.ts_ms,
            level_pct: s.level_pct,
            voltage_mv: s.voltage_mv,
            temp_dc: s.temp_dc,
            charge_uah: s.charge_uah,
            status: s.status,
            health: s.health,
            apps: r.apps.clone(),
        }
    }
}

impl TryFrom<WireRecord> for LogRecord {
    type Error = String;

    fn try_from(w: WireRecord) -> Result<Self, String> {
        let sample = BatterySample {
            ts_ms: w.ts_ms,
            level_pct: w.level_pct,
            voltage_mv: w.voltage_mv,
            temp_dc: w.temp_dc,
            charge_uah: w.charge_uah,
            status: w.status,
            health: w.health,
        };
        sample.validate()?;
        Ok(LogRecord { sample, apps: w.apps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecorderConfig {
    pub interval_s: u64,
    pub out_path: PathBuf,
}

impl RecorderConfig {
    pub fn new(out_path: impl Into<PathBuf>) -> Self {
        RecorderConfig { interval_s: DEFAULT_INTERVAL_S, out_path: out_path.into() }
    }

    pub fn validate(&self) -> Result<(), RecorderError> {
        if self.interval_s == 0 {
            return Err(RecorderError::Config("interval must be at least 1 s".into()));
        }
        Ok(())
    }
}

/// Exclusive appender for a log file.
///
/// Holds only the file handle and the last written timestamp, so memory use
/// does not depend on how long the log already is.
#[derive(Debug)]
pub struct LogWriter {
    file: File,
    path: PathBuf,
    last_ts: Option<i64>,
    sync: bool,
}

impl LogWriter {
    /// Opens (creating if needed) and locks a log for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RecorderError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .map_err(|e| RecorderError::io(format!("open {}", path.display()), e))?;
        match file.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(RecorderError::Locked(path)),
            Err(std::fs::TryLockError::Error(e)) => {
                return Err(RecorderError::io(format!("lock {}", path.display()), e))
            }
        }
        let last_ts = last_timestamp(&path)?;
        Ok(LogWriter { file, path, last_ts, sync: true })
    }

    /// Disables the per-record `fsync`. Used for bulk writes where the file is
    /// synced once at the end.
    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_ts(&self) -> Option<i64> {
        self.last_ts
    }

    /// Appends one record as a single line write.
    pub fn append(&mut self, record: &LogRecord) -> Result<(), RecorderError> {
        let ts = record.ts_ms();
        if let Some(last) = self.last_ts {
            if ts <= last {
                return Err(RecorderError::NonMonotonicTimestamp { ts_ms: ts, last_ms: last });
            }
        }
        let mut line = record.to_json_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .map_err(|e| RecorderError::io(format!("append to {}", self.path.display()), e))?;
        if self.sync {
            self.file
                .sync_data()
                .map_err(|e| RecorderError::io(format!("sync {}", self.path.display()), e))?;
        }
        self.last_ts = Some(ts);
        Ok(())
    }

    pub fn finish(self) -> Result<(), RecorderError> {
        self.file
            .sync_all()
            .map_err(|e| RecorderError::io(format!("sync {}", self.path.display()), e))
    }
}

fn last_timestamp(path: &Path) -> Result<Option<i64>, RecorderError> {
    let file = File::open(path).map_err(|e| RecorderError::io(format!("open {}", path.display()), e))?;
    let mut last = None;
    let mut lineno = 0;
    for line in BufReader::new(file).lines() {
        lineno += 1;
        let line = line.map_err(|e| RecorderError::io(format!("read {}", path.display()), e))?;
        if !line.trim().is_empty() {
            last = Some((lineno, line));
        }
    }
    match last {
        None => Ok(None),
        Some((n, line)) => LogRecord::from_json_line(&line)
            .map(|r| Some(r.ts_ms()))
            .map_err(|reason| RecorderError::Parse { line: n, reason }),
    }
}

/// Writes a whole record sequence to a fresh log, replacing any existing file.
pub fn write_log(path: impl AsRef<Path>, records: &[LogRecord]) -> Result<(), RecorderError> {
    let path = path.as_ref();
    File::create(path).map_err(|e| RecorderError::io(format!("create {}", path.display()), e))?;
    let mut w = LogWriter::open(path)?.without_sync();
    for r in records {
        w.append(r)?;
    }
    w.finish()
}

/// Loads a log strictly: the first bad line aborts with its 1-based number.
pub fn load_log(path: impl AsRef<Path>) -> Result<Vec<LogRecord>, RecorderError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| RecorderError::io(format!("open {}", path.display()), e))?;
    read_log(BufReader::new(file))
}

pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<LogRecord>, RecorderError> {
    let mut out: Vec<LogRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| RecorderError::io(format!("read line {n}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = LogRecord::from_json_line(&line).map_err(|reason| RecorderError::Parse { line: n, reason })?;
        if let Some(prev) = out.last() {
            if rec.ts_ms() <= prev.ts_ms() {
                return Err(RecorderError::Parse {
                    line: n,
                    reason: format!("timestamp {} not after {}", rec.ts_ms(), prev.ts_ms()),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Polls the source once. Battery and apps are read at the same tick.
pub fn sample_once(source: &mut dyn Source, clock: &dyn Clock) -> Result<LogRecord, RecorderError> {
    let sample = source.read_sample(clock)?;
    let apps = source.read_apps()?;
    Ok(LogRecord { sample, apps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    History,
    Tail(usize),
}

/// `(ts_ms, level_pct)` pairs for plotting the remaining-charge curve.
pub fn curve_series(records: &[LogRecord], mode: CurveMode) -> Vec<(i64, u8)> {
    let start = match mode {
        CurveMode::History => 0,
        CurveMode::Tail(n) => records.len().saturating_sub(n),
    };
    records[start..].iter().map(|r| (r.ts_ms(), r.sample.level_pct)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub written: u64,
    pub skipped: u64,
}

/// Samples every `interval_s` until `stop` fires, starting immediately.
///
/// Ticks sit on a fixed grid anchored at the first sample. A tick whose
/// source read fails, or whose timestamp does not advance, is logged and
/// skipped. I/O errors on the log end the loop.
pub fn run_loop(
    config: &RecorderConfig,
    source: &mut dyn Source,
    clock: &dyn Clock,
    stop: &StopSignal,
) -> Result<RunSummary, RecorderError> {
    config.validate()?;
    let mut writer = LogWriter::open(&config.out_path)?;
    let interval_ms = config.interval_s as i64 * 1000;
    let start = clock.now_ms();
    let mut summary = RunSummary::default();
    let mut tick: i64 = 0;

    loop {
        if stop.is_triggered() {
            break;
        }
        match sample_once(source, clock).and_then(|rec| writer.append(&rec)) {
            Ok(()) => summary.written += 1,
            Err(e @ (RecorderError::Io { .. } | RecorderError::Locked(_))) => return Err(e),
            Err(e) => {
                log::warn!("skipping tick {tick}: {e}");
                summary.skipped += 1;
            }
        }

        // Next grid point strictly in the future, so a slow tick never
        // causes a burst of catch-up samples.
        let now = clock.now_ms();
        tick += 1;
        let behind = (now - start) / interval_ms + 1;
        if behind > tick {
            tick = behind;
        }
        if !clock.sleep_until(start + tick * interval_ms, stop) {
            break;
        }
    }
    writer.finish()?;
    Ok(summary)
}
