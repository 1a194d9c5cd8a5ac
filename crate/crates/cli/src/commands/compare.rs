use std::path::Path;

use crate::commands::simulate::{run_seeds, write_all, SeedResult};
use crate::config::{LoadedConfig, MacChoice};
use crate::error::CliError;
use crate::output::{csv_text, fixed3, ratio};
use crate::report::mac_name;

/// Per-seed TDMA and CSMA results of the same experiment.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub tdma: Vec<SeedResult>,
    pub csma: Vec<SeedResult>,
}

impl Comparison {
    pub fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .tdma
            .iter()
            .chain(&self.csma)
            .map(|r| {
                let e = &r.energy;
                vec![
                    r.trace.seed.to_string(),
                    mac_name(r.trace.mac).to_owned(),
                    r.metrics.sent.to_string(),
                    ratio(r.metrics.prr),
                    fixed3(e.tx_time_ms),
                    e.backoffs.to_string(),
                    fixed3(e.tx_energy_mj),
                    fixed3(e.csma_overhead_mj),
                    fixed3(e.total_mj),
                ]
            })
            .collect();
        csv_text(
            ["seed", "mac", "sent", "prr", "tx_time_ms", "backoffs", "tx_energy_mj", "csma_overhead_mj", "total_mj"],
            &rows,
        )
    }
}

/// Runs the config under both MACs with the same traffic and seeds.
///
/// With `tdma_clear_channel` the TDMA run ignores the background windows:
/// they stand for contention that a TDMA schedule already resolves, and only
/// CSMA has to sense and back off around it.
pub fn compare_mac(loaded: &LoadedConfig, tdma_clear_channel: bool, out_dir: &Path) -> Result<Comparison, CliError> {
    let mut tdma_cfg = loaded.with_mac(MacChoice::Tdma);
    if tdma_clear_channel {
        tdma_cfg.scenario.background.clear();
    }
    let csma_cfg = loaded.with_mac(MacChoice::Csma);
    let tdma = run_seeds(&tdma_cfg)?;
    let csma = run_seeds(&csma_cfg)?;
    let cmp = Comparison { tdma, csma };
    write_all(out_dir, &[("compare.csv".to_owned(), cmp.csv()?)])?;
    Ok(cmp)
}
