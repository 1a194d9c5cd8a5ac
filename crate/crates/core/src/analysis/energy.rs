use serde::Serialize;

use super::AnalysisError;
use crate::engine::RunTrace;
use crate::time::SimTime;

/// Module supply voltage used when none is configured.
pub const DEFAULT_SUPPLY_VOLTAGE_V: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub supply_voltage_v: f64,
    pub tx_current_a: f64,
    pub tx_time_ms: f64,
    pub backoffs: u64,
    /// `V · I · total airtime`.
    pub tx_energy_mj: f64,
    /// `backoffs · energy per backoff`.
    pub csma_overhead_mj: f64,
    pub total_mj: f64,
}

/// Transmit energy plus CSMA backoff overhead of a trace. Only frames that
/// actually went on air count toward airtime.
pub fn compute_energy(
    trace: &RunTrace,
    voltage_v: f64,
    tx_current_a: f64,
    backoff_energy_mj: f64,
) -> Result<EnergyReport, AnalysisError> {
    if !(voltage_v > 0.0 && voltage_v.is_finite()) {
        return Err(AnalysisError::InvalidEnergyInput("supply voltage must be positive"));
    }
    if !(tx_current_a > 0.0 && tx_current_a.is_finite()) {
        return Err(AnalysisError::InvalidEnergyInput("transmit current must be positive"));
    }
    if !(backoff_energy_mj >= 0.0 && backoff_energy_mj.is_finite()) {
        return Err(AnalysisError::InvalidEnergyInput("backoff energy must be non-negative"));
    }
    let airtime_us: u64 = trace.attempts.iter().filter(|a| a.transmitted).map(|a| a.toa.as_us()).sum();
    let backoffs: u64 = trace.attempts.iter().map(|a| u64::from(a.backoffs)).sum();
    let tx_time_ms = SimTime::from_us(airtime_us).as_ms();
    // V · A · ms = mJ
    let tx_energy_mj = voltage_v * tx_current_a * tx_time_ms;
    let csma_overhead_mj = backoff_energy_mj * backoffs as f64;
    Ok(EnergyReport {
        supply_voltage_v: voltage_v,
        tx_current_a,
        tx_time_ms,
        backoffs,
        tx_energy_mj,
        csma_overhead_mj,
        total_mj: tx_energy_mj + csma_overhead_mj,
    })
}
