use std::collections::BTreeSet;
use std::path::Path;

use loratb::analysis::{compute_energy, compute_metrics, emit_rxpk, EnergyReport, MetricsReport};
use loratb::engine::{run, EngineError, RunTrace};
use rayon::prelude::*;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::write_atomic;
use crate::report::{energy_csv, links_csv, metrics_csv, RunKey};

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub trace: RunTrace,
    pub metrics: MetricsReport,
    pub energy: EnergyReport,
    pub rxpk: String,
}

impl SeedResult {
    pub fn key(&self) -> RunKey {
        RunKey::of(&self.trace)
    }
}

/// Engine failures caused by the inputs are validation errors; a broken
/// internal invariant is a runtime error.
pub fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::InvariantViolated { .. } => CliError::runtime(e),
        other => CliError::validation(other),
    }
}

/// Validates every seed's scenario up front, then runs the seeds in parallel.
/// Results come back in config order.
pub fn run_seeds(loaded: &LoadedConfig) -> Result<Vec<SeedResult>, CliError> {
    let seeds = &loaded.config.seeds;
    let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() {
        return Err(CliError::validation("config: `seeds` contains duplicates"));
    }
    for &seed in seeds {
        let schedule = loaded.scenario.resolve_schedule(seed).map_err(engine_error)?;
        loaded.scenario.validate(&schedule).map_err(engine_error).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("seed {seed}: {msg}")),
            other => other,
        })?;
    }
    let energy = loaded.config.energy;
    let backoff_mj = loaded.backoff_energy_mj();
    let channels = &loaded.scenario.topology.channel_table;
    seeds
        .par_iter()
        .map(|&seed| {
            let trace = run(&loaded.scenario, seed).map_err(engine_error)?;
            let metrics = compute_metrics(&trace, None);
            let energy = compute_energy(&trace, energy.supply_voltage_v, energy.tx_current_a, backoff_mj)
                .map_err(CliError::validation)?;
            let rxpk = emit_rxpk(&trace.receptions, channels).map_err(CliError::runtime)?;
            Ok(SeedResult { trace, metrics, energy, rxpk })
        })
        .collect()
}

/// File name and contents of every output of a batch.
pub fn render(loaded: &LoadedConfig, results: &[SeedResult]) -> Result<Vec<(String, String)>, CliError> {
    let mut files = Vec::new();
    for r in results {
        let seed = r.trace.seed;
        files.push((format!("trace-seed{seed}.jsonl"), r.trace.to_jsonl()));
        files.push((format!("rxpk-seed{seed}.jsonl"), r.rxpk.clone()));
    }
    let metrics: Vec<(RunKey, MetricsReport)> = results.iter().map(|r| (r.key(), r.metrics.clone())).collect();
    let energy: Vec<_> = results.iter().map(|r| (r.key(), r.trace.mac, r.energy)).collect();
    files.push(("metrics.csv".into(), metrics_csv(&metrics, false)?));
    files.push(("energy.csv".into(), energy_csv(&energy)?));
    files.push(("links.csv".into(), links_csv(&metrics, &loaded.scenario.topology.channel_table)?));
    Ok(files)
}

pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    for (name, contents) in files {
        write_atomic(&dir.join(name), contents.as_bytes())?;
    }
    Ok(())
}

/// Runs every seed and writes traces, gateway logs and report CSVs into
/// `out_dir`. Nothing is written unless every seed completes.
pub fn simulate(loaded: &LoadedConfig, out_dir: &Path) -> Result<Vec<SeedResult>, CliError> {
    let results = run_seeds(loaded)?;
    write_all(out_dir, &render(loaded, &results)?)?;
    Ok(results)
}
