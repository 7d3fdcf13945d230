use std::fmt::Write as _;

use semo_core::analyzer::{AttributionResult, BatteryConstants};
use serde::Serialize;
use serde_json::{json, Value};

pub fn print_json<T: Serialize + ?Sized>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

/// The result's own fields, plus per-group power when battery constants are known.
pub fn result_json(result: &AttributionResult, battery: Option<BatteryConstants>) -> Value {
    let mut v = serde_json::to_value(result).expect("serializable result");
    if let Some(b) = battery {
        let power: serde_json::Map<String, Value> = result
            .groups
            .iter()
            .map(|g| (g.label(), json!(b.power_mw(g.rate_pct_per_h))))
            .collect();
        v["battery"] = json!({ "capacity_mah": b.capacity_mah, "nominal_voltage_mv": b.nominal_voltage_mv });
        v["baseline_power_mw"] = json!(b.power_mw(result.baseline_pct_per_h));
        v["power_mw"] = Value::Object(power);
    }
    v
}

const GROUP_WIDTH: usize = 32;

/// Fixed-width ranking table.
pub fn result_table(result: &AttributionResult, battery: Option<BatteryConstants>) -> String {
    let power = |rate: f64| battery.map_or_else(|| "-".to_string(), |b| format!("{:.1}", b.power_mw(rate)));
    let mut s = String::new();
    let _ = writeln!(s, "{:>4}  {:<GROUP_WIDTH$}  {:>12}  {:>10}  flags", "rank", "group", "pct_per_h", "power_mw");
    for (i, g) in result.ranked().enumerate() {
        let flags: Vec<&str> = g.flags.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(
            s,
            "{:>4}  {:<GROUP_WIDTH$}  {:>12.4}  {:>10}  {}",
            i + 1,
            g.label(),
            g.rate_pct_per_h,
            power(g.rate_pct_per_h),
            flags.join(",")
        );
    }
    let _ = writeln!(
        s,
        "{:>4}  {:<GROUP_WIDTH$}  {:>12.4}  {:>10}",
        "-",
        "(baseline)",
        result.baseline_pct_per_h,
        power(result.baseline_pct_per_h)
    );
    let _ = writeln!(s, "intervals: {}", result.intervals);
    let _ = writeln!(s, "residual_rms: {:.4} pct/h", result.residual_rms);
    if !result.unobserved.is_empty() {
        let _ = writeln!(s, "unobserved: {}", result.unobserved.names().join(", "));
    }
    s
}
