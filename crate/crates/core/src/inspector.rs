//! Battery condition checks and the human-readable battery report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sources::{BatterySample, Health, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WarningKind {
    LowBattery,
    Overheat,
    UnhealthyBattery,
    VoltageOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
    /// The configured limit that was crossed, in the unit of the checked field.
    /// For `UnhealthyBattery` this is 0, for `VoltageOutOfRange` the violated bound.
    pub threshold: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectorConfig {
    pub low_battery_pct: u8,
    pub overheat_dc: i32,
    pub voltage_min_mv: u32,
    pub voltage_max_mv: u32,
}

impl Default for InspectorConfig {
    fn default() -> Self {
        InspectorConfig {
            low_battery_pct: 15,
            overheat_dc: 450,
            voltage_min_mv: 3000,
            voltage_max_mv: 4500,
        }
    }
}

impl InspectorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.low_battery_pct == 0 || self.low_battery_pct >= 100 {
            return Err(format!("low battery threshold {} outside 1..=99", self.low_battery_pct));
        }
        if self.voltage_min_mv >= self.voltage_max_mv {
            return Err("voltage_min_mv must be below voltage_max_mv".into());
        }
        Ok(())
    }
}

/// Checks a sample against the configured limits.
///
/// Warnings come out in `WarningKind` declaration order. Low battery is not
/// reported while the battery is charging or full.
pub fn evaluate(sample: &BatterySample, config: &InspectorConfig) -> Vec<Warning> {
    let mut out = Vec::new();

    let on_battery = matches!(sample.status, Status::Discharging | Status::NotCharging);
    if on_battery && sample.level_pct < config.low_battery_pct {
        out.push(Warning {
            kind: WarningKind::LowBattery,
            message: format!(
                "battery at {}% (below {}%), please charge",
                sample.level_pct, config.low_battery_pct
            ),
            threshold: config.low_battery_pct.into(),
        });
    }

    if sample.temp_dc > config.overheat_dc {
        out.push(Warning {
            kind: WarningKind::Overheat,
            message: format!(
                "battery temperature {} above {}",
                format_temp(sample.temp_dc),
                format_temp(config.overheat_dc)
            ),
            threshold: config.overheat_dc.into(),
        });
    }

    if !matches!(sample.health, Health::Good | Health::Unknown) {
        out.push(Warning {
            kind: WarningKind::UnhealthyBattery,
            message: format!("battery health reported as {}", sample.health),
            threshold: 0,
        });
    }

    let bound = if sample.voltage_mv < config.voltage_min_mv {
        Some(config.voltage_min_mv)
    } else if sample.voltage_mv > config.voltage_max_mv {
        Some(config.voltage_max_mv)
    } else {
        None
    };
    if let Some(bound) = bound {
        out.push(Warning {
            kind: WarningKind::VoltageOutOfRange,
            message: format!(
                "battery voltage {} mV outside {}..={} mV",
                sample.voltage_mv, config.voltage_min_mv, config.voltage_max_mv
            ),
            threshold: bound.into(),
        });
    }

    out
}

fn format_temp(dc: i32) -> String {
    let sign = if dc < 0 { "-" } else { "" };
    let abs = dc.unsigned_abs();
    format!("{sign}{}.{} °C", abs / 10, abs % 10)
}

/// Multi-line battery report, one field per line.
pub fn describe(sample: &BatterySample) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "time: {} ms", sample.ts_ms);
    let _ = writeln!(s, "level: {}%", sample.level_pct);
    let _ = writeln!(s, "status: {}", sample.status);
    let _ = writeln!(s, "health: {}", sample.health);
    let _ = writeln!(s, "voltage: {} mV", sample.voltage_mv);
    let _ = writeln!(s, "temperature: {}", format_temp(sample.temp_dc));
    match sample.charge_uah {
        Some(c) => {
            let _ = writeln!(s, "charge: {c} µAh");
        }
        None => {
            let _ = writeln!(s, "charge: n/a");
        }
    }
    s
}
