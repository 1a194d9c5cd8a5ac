use std::path::{Path, PathBuf};

use loratb::analysis::{compute_metrics, link_breakdown, parse_rxpk, MetricsReport, RxPk};
use loratb::engine::RunTrace;
use loratb::mac::DeadlinePolicy;
use serde_json::Value;

use crate::commands::simulate::write_all;
use crate::error::CliError;
use crate::output::read_to_string;
use crate::report::{jitter_histogram, link_plots, metrics_csv, mhz, prr_matrix, rxpk_csv, RunKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Auto,
    Trace,
    Rxpk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRequest {
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    /// Report deadline-aware `prr`/`plr` columns.
    pub with_deadlines: bool,
    /// Recompute deadlines as release plus this budget.
    pub deadline_ms: Option<f64>,
    pub jitter_bin_ms: f64,
    /// Lay the four trace inputs out as the 2x2 PRR table.
    pub prr_matrix: bool,
}

#[derive(Debug, Clone)]
pub enum Loaded {
    Trace(Box<RunTrace>),
    Rxpk(Vec<RxPk>),
}

/// What `analyze` found, per input in order.
#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub traces: Vec<(PathBuf, RunKey, MetricsReport)>,
    pub logs: Vec<(PathBuf, Vec<RxPk>)>,
    pub files: Vec<(String, String)>,
}

pub fn load_input(path: &Path, format: InputFormat) -> Result<Loaded, CliError> {
    let text = read_to_string(path)?;
    let bad = |e: &dyn std::fmt::Display| CliError::validation(format!("{}: {e}", path.display()));
    let format = match format {
        InputFormat::Auto => detect(&text).ok_or_else(|| bad(&"neither a run trace nor an rxpk log"))?,
        f => f,
    };
    match format {
        InputFormat::Rxpk => parse_rxpk(&text).map(Loaded::Rxpk).map_err(|e| bad(&e)),
        _ => RunTrace::from_jsonl(&text).map(|t| Loaded::Trace(Box::new(t))).map_err(|e| bad(&e)),
    }
}

fn detect(text: &str) -> Option<InputFormat> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    let v: Value = serde_json::from_str(first).ok()?;
    if v.get("rxpk").is_some() {
        Some(InputFormat::Rxpk)
    } else if v.get("type").and_then(Value::as_str) == Some("run") {
        Some(InputFormat::Trace)
    } else {
        None
    }
}

pub fn analyze(req: &AnalyzeRequest, out_dir: &Path) -> Result<AnalyzeOutcome, CliError> {
    if req.inputs.is_empty() {
        return Err(CliError::usage("analyze needs at least one input"));
    }
    if !(req.jitter_bin_ms > 0.0) {
        return Err(CliError::usage("--jitter-bin-ms must be positive"));
    }
    let policy = match req.deadline_ms {
        Some(ms) if ms >= 0.0 && ms.is_finite() => Some(DeadlinePolicy::Relative { ms }),
        Some(_) => return Err(CliError::usage("--deadline-ms must be non-negative")),
        None => None,
    };
    let mut traces = Vec::new();
    let mut logs = Vec::new();
    let mut runs: Vec<RunTrace> = Vec::new();
    for path in &req.inputs {
        match load_input(path, req.format)? {
            Loaded::Trace(t) => {
                let m = compute_metrics(&t, policy.as_ref());
                traces.push((path.clone(), RunKey::of(&t), m));
                runs.push(*t);
            }
            Loaded::Rxpk(p) => logs.push((path.clone(), p)),
        }
    }
    if req.prr_matrix && (traces.len() != 4 || !logs.is_empty()) {
        return Err(CliError::usage("--prr-matrix needs exactly four run traces"));
    }

    let mut files = Vec::new();
    if !traces.is_empty() {
        let rows: Vec<(RunKey, MetricsReport)> = traces.iter().map(|(_, k, m)| (k.clone(), m.clone())).collect();
        files.push(("metrics.csv".to_owned(), metrics_csv(&rows, req.with_deadlines)?));
        let delivered = || runs.iter().flat_map(|t| t.attempts.iter()).filter(|a| a.delivered());
        let per_sf = link_breakdown(delivered().filter_map(|a| Some((u64::from(a.spreading_factor), a.rssi_dbm?, a.snr_db?))));
        let per_freq = link_breakdown(runs.iter().flat_map(|t| &t.receptions).map(|r| (r.frequency_hz, r.rssi_dbm, r.snr_db)));
        files.extend(link_plots(&per_sf, &per_freq).into_iter().map(|(n, s)| (n.to_owned(), s)));
        let errors: Vec<f64> = runs
            .iter()
            .flat_map(|t| &t.attempts)
            .filter(|a| a.transmitted)
            .map(|a| a.release_error_ms())
            .collect();
        files.push(("jitter_hist.dat".to_owned(), jitter_histogram(&errors, req.jitter_bin_ms)));
        if req.prr_matrix {
            let cells: [MetricsReport; 4] = std::array::from_fn(|i| traces[i].2.clone());
            files.push(("prr_matrix.dat".to_owned(), prr_matrix(&cells)));
        }
    }
    if !logs.is_empty() {
        let packets: Vec<RxPk> = logs.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
        files.push(("receptions.csv".to_owned(), rxpk_csv(&packets)?));
        let per_sf = link_breakdown(packets.iter().map(|p| (u64::from(p.spreading_factor), f64::from(p.rssi_dbm), p.lsnr_db)));
        let per_freq = link_breakdown(packets.iter().map(|p| (p.freq_hz, f64::from(p.rssi_dbm), p.lsnr_db)));
        let prefix = if traces.is_empty() { "" } else { "gateway_" };
        files.extend(link_plots(&per_sf, &per_freq).into_iter().map(|(n, s)| (format!("{prefix}{n}"), s)));
    }
    write_all(out_dir, &files)?;
    Ok(AnalyzeOutcome { traces, logs, files })
}

/// Human summary printed after the files are written.
pub fn render(req: &AnalyzeRequest, outcome: &AnalyzeOutcome) -> String {
    let mut s = String::new();
    for (path, _, m) in &outcome.traces {
        let (prr, plr) = if req.with_deadlines { (m.prr_with_deadlines, 1.0 - m.prr_with_deadlines) } else { (m.prr, m.plr) };
        s.push_str(&format!(
            "{}: {} sent, {} received, {} on time, prr {prr:.10}, plr {plr:.10}\n",
            path.display(),
            m.sent,
            m.received,
            m.on_time
        ));
    }
    for (path, packets) in &outcome.logs {
        s.push_str(&format!("{}: {} receptions\n", path.display(), packets.len()));
        let mut freqs: Vec<u64> = packets.iter().map(|p| p.freq_hz).collect();
        freqs.sort_unstable();
        freqs.dedup();
        for f in freqs {
            let n = packets.iter().filter(|p| p.freq_hz == f).count();
            s.push_str(&format!("  {} MHz: {n}\n", mhz(f)));
        }
    }
    s
}
