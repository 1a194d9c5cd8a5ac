use loratb::analysis::{find_min_period_empirical, MinPeriodSearch};
use loratb::schedule::min_period;

use crate::error::CliError;

/// Bisection resolution of the empirical search, in ms.
pub const SEARCH_RESOLUTION_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MinPeriodRow {
    pub sf: u8,
    pub radios: usize,
    pub analytic_ms: f64,
    pub empirical_ms: u64,
    pub probes: usize,
}

impl MinPeriodRow {
    /// True when analytic and empirical values differ by more than one
    /// search step.
    pub fn disagrees(&self) -> bool {
        (self.empirical_ms as f64 - self.analytic_ms).abs() > SEARCH_RESOLUTION_MS
    }
}

/// Analytic bound and empirical search for every SF and radio count.
pub fn min_periods(search: &MinPeriodSearch, sfs: &[u8], radios: &[usize]) -> Result<Vec<MinPeriodRow>, CliError> {
    let mut rows = Vec::new();
    for &sf in sfs {
        for &n in radios {
            if n == 0 {
                return Err(CliError::usage("--radios must be at least 1"));
            }
            let analytic_ms = min_period(sf, search.payload_len, n, search.bus_overhead_ms, &search.radio)
                .map_err(|e| CliError::usage(e.to_string()))?;
            // Half the bound cannot sustain the load and twice it always can.
            let lo = ((analytic_ms / 2.0).floor() as u64).max(1);
            let hi = (analytic_ms * 2.0).ceil() as u64 + 10;
            let found = find_min_period_empirical(search, sf, n, (lo, hi)).map_err(CliError::runtime)?;
            rows.push(MinPeriodRow { sf, radios: n, analytic_ms, empirical_ms: found.period_ms, probes: found.probes.len() });
        }
    }
    Ok(rows)
}

pub fn render(rows: &[MinPeriodRow]) -> String {
    let mut s = format!("{:>3} {:>6} {:>12} {:>13} {:>7}  status\n", "sf", "radios", "analytic_ms", "empirical_ms", "probes");
    for r in rows {
        let status = if r.disagrees() { "DISAGREE" } else { "ok" };
        s.push_str(&format!(
            "{:>3} {:>6} {:>12.3} {:>13} {:>7}  {status}\n",
            r.sf, r.radios, r.analytic_ms, r.empirical_ms, r.probes
        ));
    }
    s
}
