//! CSV export of raw records and of attribution results.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::{AttributionResult, BatteryConstants};
use crate::recorder::LogRecord;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv export failed: {0}")]
    Io(#[from] std::io::Error),
}

pub const RECORD_COLUMNS: [&str; 7] = ["ts_ms", "level_pct", "voltage_mv", "temp_dc", "charge_uah", "status", "apps"];
pub const RESULT_COLUMNS: [&str; 4] = ["group", "rate_pct_per_h", "power_mw", "flags"];

/// One row per record; `apps` is `;`-joined, a missing counter is empty.
pub fn write_records_csv<W: Write>(records: &[LogRecord], out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        let s = &r.sample;
        w.write_record([
            s.ts_ms.to_string(),
            s.level_pct.to_string(),
            s.voltage_mv.to_string(),
            s.temp_dc.to_string(),
            s.charge_uah.map(|c| c.to_string()).unwrap_or_default(),
            format!("{:?}", s.status),
            r.apps.names().join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per group in ranking order. `power_mw` is empty without battery
/// constants.
pub fn write_result_csv<W: Write>(
    result: &AttributionResult,
    battery: Option<BatteryConstants>,
    out: W,
) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for g in result.ranked() {
        let flags: Vec<&str> = g.flags.iter().map(|f| f.as_str()).collect();
        w.write_record([
            g.label(),
            g.rate_pct_per_h.to_string(),
            battery.map(|b| b.power_mw(g.rate_pct_per_h).to_string()).unwrap_or_default(),
            flags.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_records_csv(records: &[LogRecord], path: impl AsRef<Path>) -> Result<(), ExportError> {
    let file = std::fs::File::create(path)?;
    write_records_csv(records, std::io::BufWriter::new(file))
}

pub fn export_result_csv(
    result: &AttributionResult,
    battery: Option<BatteryConstants>,
    path: impl AsRef<Path>,
) -> Result<(), ExportError> {
    let file = std::fs::File::create(path)?;
    write_result_csv(result, battery, std::io::BufWriter::new(file))
}
