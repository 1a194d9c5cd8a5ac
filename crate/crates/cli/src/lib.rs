//! Command-line driver for the loratb simulator.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use loratb::analysis::MinPeriodSearch;
use loratb::schedule::CapacityBudget;

use crate::args::{Cli, Command, FormatArg};
use crate::commands::analyze::{AnalyzeRequest, InputFormat};
use crate::commands::capacity::CapacityRequest;
use crate::commands::gen_schedule::{GenScheduleRequest, TrafficKind};
use crate::config::load_config;
pub use crate::error::CliError;
use crate::output::write_atomic;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::GenSchedule(a) => {
            let kind = if a.aperiodic {
                TrafficKind::Aperiodic { events: a.events.unwrap_or(0), seed: a.seed }
            } else {
                let period_ms = a.period_ms.ok_or_else(|| CliError::usage("--period-ms is required"))?;
                TrafficKind::Periodic { period_ms, phases_ms: a.phases_ms }
            };
            let req = GenScheduleRequest {
                nodes: a.nodes as usize,
                horizon_ms: a.horizon_ms,
                sf: a.sf,
                ch: a.ch,
                kind,
                radios_per_master: a.radios_per_master as usize,
                payload_len: a.payload_len,
                bus_overhead_ms: a.bus_overhead_ms,
            };
            let schedule = req.generate()?;
            let conflicts = req.conflicts(&schedule)?;
            if !conflicts.is_empty() {
                let _ = writeln!(err, "warning: {} conflict(s), first {:?}", conflicts.len(), conflicts[0]);
                if a.strict {
                    return Err(CliError::validation("schedule has conflicts"));
                }
            }
            let mut json = schedule.to_json();
            json.push('\n');
            match a.out {
                Some(path) => write_atomic(&path, json.as_bytes()),
                None => emit(out, &json),
            }
        }
        Command::Simulate(a) => {
            let loaded = load_config(&a.config)?;
            let dir = a.out.unwrap_or_else(|| loaded.output_dir.clone());
            let results = commands::simulate::simulate(&loaded, &dir)?;
            let mut s = String::new();
            for r in &results {
                s.push_str(&format!(
                    "seed {}: {} sent, {} received, plr {:.10}, energy {:.3} mJ\n",
                    r.trace.seed, r.metrics.sent, r.metrics.received, r.metrics.plr, r.energy.total_mj
                ));
            }
            s.push_str(&format!("wrote {}\n", dir.display()));
            emit(out, &s)
        }
        Command::MinPeriod(a) => {
            let search = MinPeriodSearch {
                payload_len: a.payload_len,
                bus_overhead_ms: a.bus_overhead_ms,
                cycles: a.cycles,
                drift_tolerance_ms: a.drift_tolerance_ms,
                ..MinPeriodSearch::default()
            };
            let radios: Vec<usize> = a.radios.iter().map(|&r| r as usize).collect();
            let rows = commands::min_period::min_periods(&search, &a.sf, &radios)?;
            emit(out, &commands::min_period::render(&rows))
        }
        Command::Analyze(a) => {
            let req = AnalyzeRequest {
                inputs: a.inputs,
                format: match a.format {
                    FormatArg::Auto => InputFormat::Auto,
                    FormatArg::Trace => InputFormat::Trace,
                    FormatArg::Rxpk => InputFormat::Rxpk,
                },
                with_deadlines: a.with_deadlines,
                deadline_ms: a.deadline_ms,
                jitter_bin_ms: a.jitter_bin_ms,
                prr_matrix: a.prr_matrix,
            };
            let outcome = commands::analyze::analyze(&req, &a.out)?;
            emit(out, &commands::analyze::render(&req, &outcome))
        }
        Command::Capacity(a) => {
            let req = CapacityRequest {
                bytes_per_event: a.bytes_per_event,
                events_per_s: a.events_per_s,
                devices: a.devices,
                days: a.days,
                budget: CapacityBudget {
                    supply_current_a: a.supply_a,
                    board_active_current_a: a.board_a,
                    radio_tx_current_a: a.radio_tx_a,
                    gpio_pins_total: a.gpio_total,
                    gpio_pins_per_radio: a.gpio_per_radio,
                    bytes_per_event: a.bytes_per_event,
                    ..CapacityBudget::default()
                },
                concurrent_tx: a.concurrent_tx,
                gpio_shared_spi: a.gpio_shared_spi,
            };
            let report = commands::capacity::capacity(&req)?;
            emit(out, &commands::capacity::render(&req, &report))
        }
        Command::CompareMac(a) => {
            let loaded = load_config(&a.config)?;
            let dir = a.out.unwrap_or_else(|| loaded.output_dir.join("compare"));
            let cmp = commands::compare::compare_mac(&loaded, a.tdma_clear_channel, &dir)?;
            let mut s = String::from("seed  mac   tx_energy_mj  overhead_mj  total_mj  prr\n");
            for r in cmp.tdma.iter().chain(&cmp.csma) {
                s.push_str(&format!(
                    "{:<5} {:<5} {:>12.3} {:>12.3} {:>9.3}  {:.10}\n",
                    r.trace.seed,
                    report::mac_name(r.trace.mac),
                    r.energy.tx_energy_mj,
                    r.energy.csma_overhead_mj,
                    r.energy.total_mj,
                    r.metrics.prr
                ));
            }
            s.push_str(&format!("wrote {}\n", dir.display()));
            emit(out, &s)
        }
    }
}
