use loratb::schedule::{max_radios_per_master, memory_footprint_days, power_budget, CapacityBudget, SHARED_SPI_PINS};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRequest {
    pub bytes_per_event: u64,
    pub events_per_s: f64,
    pub devices: u64,
    pub days: f64,
    pub budget: CapacityBudget,
    pub concurrent_tx: u32,
    /// Count the three SPI lines once for the whole bus instead of inside
    /// every radio's pin budget.
    pub gpio_shared_spi: bool,
}

impl Default for CapacityRequest {
    fn default() -> Self {
        let budget = CapacityBudget::default();
        CapacityRequest {
            bytes_per_event: budget.bytes_per_event,
            events_per_s: 1.0,
            devices: 10,
            days: 1.0,
            budget,
            concurrent_tx: 1,
            gpio_shared_spi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub memory_bytes: f64,
    pub headroom_a: f64,
    pub max_concurrent_tx: u32,
    pub concurrent_tx_feasible: bool,
    pub gpio_radios: u32,
}

pub fn capacity(req: &CapacityRequest) -> Result<CapacityReport, CliError> {
    if !(req.events_per_s >= 0.0 && req.days >= 0.0) {
        return Err(CliError::usage("event rate and duration must be non-negative"));
    }
    req.budget.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let power = power_budget(&req.budget, req.concurrent_tx).map_err(|e| CliError::usage(e.to_string()))?;
    let pins = if req.gpio_shared_spi {
        req.budget.gpio_pins_total.saturating_sub(SHARED_SPI_PINS)
    } else {
        req.budget.gpio_pins_total
    };
    let gpio_radios = max_radios_per_master(pins, req.budget.gpio_pins_per_radio).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(CapacityReport {
        memory_bytes: memory_footprint_days(req.bytes_per_event, req.events_per_s, req.devices, req.days),
        headroom_a: power.headroom_a,
        max_concurrent_tx: power.max_concurrent_tx,
        concurrent_tx_feasible: power.feasible,
        gpio_radios,
    })
}

pub fn render(req: &CapacityRequest, r: &CapacityReport) -> String {
    format!(
        "memory_footprint_bytes {:.0}\npower_headroom_a {:.3}\nmax_concurrent_tx {}\nconcurrent_tx {} feasible {}\ngpio_radio_capacity {}\n",
        r.memory_bytes,
        r.headroom_a,
        r.max_concurrent_tx,
        req.concurrent_tx,
        if r.concurrent_tx_feasible { "yes" } else { "no" },
        r.gpio_radios,
    )
}
