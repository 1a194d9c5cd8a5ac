//! Back-of-envelope planners for what one master can host: schedule memory,
//! transmit current and GPIO pins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// MOSI, MISO and SCLK are shared by every radio on a bus.
pub const SHARED_SPI_PINS: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("radio transmit current is zero but {0} concurrent transmissions were requested")]
    ZeroTxCurrent(u32),
    #[error("gpio_per_radio must be at least 1")]
    ZeroGpioPerRadio,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
}

/// Electrical and pin budget of one master board. Currents in amperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityBudget {
    pub supply_current_a: f64,
    pub board_active_current_a: f64,
    pub radio_tx_current_a: f64,
    pub radio_idle_current_a: f64,
    pub gpio_pins_total: u32,
    pub gpio_pins_per_radio: u32,
    pub bytes_per_event: u64,
}

impl Default for CapacityBudget {
    /// Raspberry Pi 3B+ driving SX1262 modules.
    fn default() -> Self {
        CapacityBudget {
            supply_current_a: 2.5,
            board_active_current_a: 0.5,
            radio_tx_current_a: 0.7,
            radio_idle_current_a: 0.000_000_005,
            gpio_pins_total: 28,
            gpio_pins_per_radio: 4,
            bytes_per_event: 13,
        }
    }
}

impl CapacityBudget {
    pub fn validate(&self) -> Result<(), CapacityError> {
        let currents = [
            self.supply_current_a,
            self.board_active_current_a,
            self.radio_tx_current_a,
            self.radio_idle_current_a,
        ];
        if currents.iter().any(|c| !(*c >= 0.0)) {
            return Err(CapacityError::InvalidBudget("currents must be non-negative".into()));
        }
        if self.supply_current_a < self.board_active_current_a {
            return Err(CapacityError::InvalidBudget("supply current below bare-board draw".into()));
        }
        if self.gpio_pins_per_radio == 0 {
            return Err(CapacityError::ZeroGpioPerRadio);
        }
        Ok(())
    }

    pub fn max_radios(&self) -> Result<u32, CapacityError> {
        max_radios_per_master(self.gpio_pins_total, self.gpio_pins_per_radio)
    }
}

/// Bytes needed to store every schedule event generated over `duration_s`.
pub fn memory_footprint(bytes_per_event: u64, events_per_s_per_device: f64, devices: u64, duration_s: f64) -> f64 {
    bytes_per_event as f64 * events_per_s_per_device * devices as f64 * duration_s
}

pub fn memory_footprint_days(bytes_per_event: u64, events_per_s_per_device: f64, devices: u64, days: f64) -> f64 {
    memory_footprint(bytes_per_event, events_per_s_per_device, devices, days * SECONDS_PER_DAY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub headroom_a: f64,
    pub feasible: bool,
    /// `u32::MAX` when transmitting draws no current.
    pub max_concurrent_tx: u32,
}

/// Current left for radios after the board's own draw, and how many radios
/// may transmit at once within it.
pub fn power_budget(budget: &CapacityBudget, concurrent_tx: u32) -> Result<PowerReport, CapacityError> {
    let headroom_a = budget.supply_current_a - budget.board_active_current_a;
    if budget.radio_tx_current_a == 0.0 {
        if concurrent_tx > 0 {
            return Err(CapacityError::ZeroTxCurrent(concurrent_tx));
        }
        return Ok(PowerReport { headroom_a, feasible: true, max_concurrent_tx: u32::MAX });
    }
    let draw = f64::from(concurrent_tx) * budget.radio_tx_current_a;
    Ok(PowerReport {
        headroom_a,
        feasible: draw <= headroom_a,
        max_concurrent_tx: (headroom_a / budget.radio_tx_current_a).floor().max(0.0) as u32,
    })
}

pub fn max_radios_per_master(gpio_total: u32, gpio_per_radio: u32) -> Result<u32, CapacityError> {
    if gpio_per_radio == 0 {
        return Err(CapacityError::ZeroGpioPerRadio);
    }
    Ok(gpio_total / gpio_per_radio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scheduler_memory_for_ten_devices_over_a_day() {
        assert_eq!(memory_footprint(13, 1.0, 10, SECONDS_PER_DAY), 11_232_000.0);
        assert_eq!(memory_footprint_days(13, 1.0, 10, 1.0), 11_232_000.0);
        assert_eq!(memory_footprint(13, 1.0, 1, SECONDS_PER_DAY), 1_123_200.0);
        assert_eq!(memory_footprint(13, 1.0, 0, SECONDS_PER_DAY), 0.0);
    }

    #[test]
    fn pi_power_headroom() {
        let b = CapacityBudget::default();
        let one = power_budget(&b, 1).unwrap();
        assert_eq!(one.headroom_a, 2.0);
        assert!(one.feasible);
        assert_eq!(one.max_concurrent_tx, 2);
        assert!(!power_budget(&b, 3).unwrap().feasible);
        assert!(power_budget(&b, 0).unwrap().feasible);
    }

    #[test]
    fn zero_tx_current() {
        let b = CapacityBudget { radio_tx_current_a: 0.0, ..CapacityBudget::default() };
        assert_eq!(power_budget(&b, 1), Err(CapacityError::ZeroTxCurrent(1)));
        assert!(power_budget(&b, 0).unwrap().feasible);
    }

    #[test]
    fn gpio_capacity() {
        assert_eq!(max_radios_per_master(28, 4), Ok(7));
        assert_eq!(max_radios_per_master(28, 28), Ok(1));
        assert_eq!(max_radios_per_master(28 - SHARED_SPI_PINS, 4), Ok(6));
        assert_eq!(max_radios_per_master(28, 0), Err(CapacityError::ZeroGpioPerRadio));
    }

    #[test]
    fn budget_validation() {
        assert!(CapacityBudget::default().validate().is_ok());
        let b = CapacityBudget { supply_current_a: 0.4, ..CapacityBudget::default() };
        assert!(b.validate().is_err());
    }

    proptest! {
        #[test]
        fn footprint_is_multiplicative(b in 0u64..100, r in 0.0f64..10.0, d in 0u64..100, s in 0.0f64..1e6) {
            let f = memory_footprint(b, r, d, s);
            if b == 0 || r == 0.0 || d == 0 || s == 0.0 {
                prop_assert_eq!(f, 0.0);
            }
            let doubled = memory_footprint(b, r, 2 * d, s);
            prop_assert!((doubled - 2.0 * f).abs() <= 1e-9 * doubled.abs().max(1.0));
        }
    }
}
