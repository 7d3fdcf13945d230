//! `semo`: battery inspection, recording and per-application energy analysis.
//!
//! Exit status: 0 on success, 1 on usage, parse or I/O errors, 2 when
//! `inspect` raised warnings or `analyze` found no usable discharge data.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semo_core::analyzer::{self, AnalyzeError, AnalyzeOptions, BatteryConstants, ChargeCounter};
use semo_core::clock::{StopSignal, SystemClock};
use semo_core::inspector::{self, InspectorConfig};
use semo_core::recorder::{self, CurveMode, RecorderConfig, RecorderError, DEFAULT_INTERVAL_S};
use semo_core::simulator::{self, Scenario};
use semo_core::sources::{self, FsSource, DEFAULT_SOURCE_ROOT, SOURCE_ROOT_ENV};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "semo", version, about = "Battery monitor and per-application energy analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Show the current battery state and any warnings.
    Inspect {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        json: bool,
    },
    /// Sample the battery and running apps into a JSONL log until interrupted.
    Record {
        #[arg(long)]
        out: PathBuf,
        /// Seconds between samples.
        #[arg(long, default_value_t = DEFAULT_INTERVAL_S, value_parser = clap::value_parser!(u64).range(1..))]
        interval: u64,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        json: bool,
    },
    /// Emit the remaining-charge curve of a log as `ts_ms,level_pct` rows.
    Curve {
        log: PathBuf,
        /// Only the last N samples (real-time view).
        #[arg(long)]
        tail: Option<usize>,
        #[arg(long, value_enum, default_value_t = CurveFormat::Csv)]
        format: CurveFormat,
        #[arg(long)]
        json: bool,
    },
    /// Rank applications by drain rate.
    Analyze {
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = AnalyzeFormat::Table)]
        format: AnalyzeFormat,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        battery: BatteryArgs,
        #[arg(long, default_value = "auto", value_parser = parse_counter)]
        use_charge_counter: ChargeCounter,
    },
    /// Export log records (or, with --analysis, the ranking) as CSV.
    Export {
        log: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        analysis: bool,
        #[command(flatten)]
        battery: BatteryArgs,
        #[arg(long)]
        json: bool,
    },
    /// Generate a log from a workload scenario with known power draw.
    Simulate {
        /// Scenario JSON file.
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        scenario: Option<PathBuf>,
        /// Use the built-in five-task scenario.
        #[arg(long)]
        builtin: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the built-in five-task scenario as JSON.
    Scenario,
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Power-supply style directory with battery files and `running_apps`.
    #[arg(long, env = SOURCE_ROOT_ENV, default_value = DEFAULT_SOURCE_ROOT)]
    source_root: PathBuf,
}

#[derive(Args, Debug)]
struct BatteryArgs {
    /// Battery capacity, for converting rates to milliwatts.
    #[arg(long, requires = "voltage_mv", value_parser = positive)]
    capacity_mah: Option<f64>,
    /// Nominal battery voltage, for converting rates to milliwatts.
    #[arg(long, requires = "capacity_mah", value_parser = positive)]
    voltage_mv: Option<f64>,
}

impl BatteryArgs {
    fn constants(&self) -> Option<BatteryConstants> {
        Some(BatteryConstants { capacity_mah: self.capacity_mah?, nominal_voltage_mv: self.voltage_mv? })
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CurveFormat {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AnalyzeFormat {
    Table,
    Csv,
    Json,
}

fn parse_counter(s: &str) -> Result<ChargeCounter, String> {
    s.parse()
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

/// Failure of a subcommand, carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<RecorderError> for Failure {
    fn from(e: RecorderError) -> Self {
        match &e {
            RecorderError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::usage(format!("file not found: {e}"))
            }
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<AnalyzeError> for Failure {
    fn from(e: AnalyzeError) -> Self {
        let code = match e {
            AnalyzeError::TooFewSamples { .. } | AnalyzeError::DegenerateSystem => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("semo: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<Vec<recorder::LogRecord>, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!("file not found: {}", path.display())));
    }
    Ok(recorder::load_log(path)?)
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Inspect { source, json } => {
            let sample = sources::read_battery_sample(&source.source_root, &SystemClock)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let warnings = inspector::evaluate(&sample, &InspectorConfig::default());
            if json {
                output::print_json(&json!({ "sample": sample, "warnings": warnings }));
            } else {
                print!("{}", inspector::describe(&sample));
                for w in &warnings {
                    println!("warning: {}", w.message);
                }
            }
            Ok(if warnings.is_empty() { 0 } else { 2 })
        }

        Command::Record { out, interval, source, json } => {
            let config = RecorderConfig { interval_s: interval, out_path: out };
            let stop = StopSignal::new();
            let handler_stop = stop.clone();
            ctrlc::set_handler(move || handler_stop.trigger())
                .map_err(|e| Failure::usage(format!("cannot install signal handler: {e}")))?;
            let mut src = FsSource::new(source.source_root);
            let summary = recorder::run_loop(&config, &mut src, &SystemClock, &stop)?;
            if json {
                output::print_json(&json!({
                    "out": config.out_path,
                    "written": summary.written,
                    "skipped": summary.skipped,
                }));
            } else {
                eprintln!("wrote {} records to {} ({} ticks skipped)", summary.written, config.out_path.display(), summary.skipped);
            }
            Ok(0)
        }

        Command::Curve { log, tail, format, json } => {
            let records = load(&log)?;
            let mode = tail.map_or(CurveMode::History, CurveMode::Tail);
            let series = recorder::curve_series(&records, mode);
            if json || format == CurveFormat::Json {
                let rows: Vec<_> = series.iter().map(|(t, l)| json!({ "ts_ms": t, "level_pct": l })).collect();
                output::print_json(&serde_json::Value::Array(rows));
            } else {
                println!("ts_ms,level_pct");
                for (t, l) in series {
                    println!("{t},{l}");
                }
            }
            Ok(0)
        }

        Command::Analyze { log, format, json, battery, use_charge_counter } => {
            let records = load(&log)?;
            let opts = AnalyzeOptions { charge_counter: use_charge_counter, ..Default::default() };
            let result = analyzer::attribute(&records, &opts)?;
            let constants = battery.constants();
            let format = if json { AnalyzeFormat::Json } else { format };
            match format {
                AnalyzeFormat::Json => output::print_json(&output::result_json(&result, constants)),
                AnalyzeFormat::Csv => analyzer::write_result_csv(&result, constants, std::io::stdout().lock())
                    .map_err(|e| Failure::usage(e.to_string()))?,
                AnalyzeFormat::Table => print!("{}", output::result_table(&result, constants)),
            }
            Ok(0)
        }

        Command::Export { log, csv, analysis, battery, json } => {
            let records = load(&log)?;
            let rows = if analysis {
                let result = analyzer::attribute(&records, &AnalyzeOptions::default())?;
                analyzer::export_result_csv(&result, battery.constants(), &csv)
                    .map_err(|e| Failure::usage(e.to_string()))?;
                result.groups.len()
            } else {
                analyzer::export_records_csv(&records, &csv).map_err(|e| Failure::usage(e.to_string()))?;
                records.len()
            };
            if json {
                output::print_json(&json!({ "csv": csv, "rows": rows }));
            } else {
                eprintln!("exported {rows} rows to {}", csv.display());
            }
            Ok(0)
        }

        Command::Simulate { scenario, builtin, out, json } => {
            let scenario = if builtin {
                simulator::builtin_scenario()
            } else {
                let path = scenario.expect("clap enforces scenario or --builtin");
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<Scenario>(&text)
                    .map_err(|e| Failure::usage(format!("invalid scenario {}: {e}", path.display())))?
            };
            let records = simulator::simulate(&scenario).map_err(|e| Failure::usage(e.to_string()))?;
            recorder::write_log(&out, &records)?;
            if json {
                output::print_json(&json!({ "out": out, "records": records.len() }));
            } else {
                eprintln!("wrote {} simulated records to {}", records.len(), out.display());
            }
            Ok(0)
        }

        Command::Scenario => {
            output::print_json(&simulator::builtin_scenario());
            Ok(0)
        }
    }
}
