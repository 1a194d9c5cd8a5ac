//! Everything downstream of a trace: loss and timing metrics, energy,
//! the empirical minimum-period search and the gateway log codec.

mod energy;
mod metrics;
mod min_period;
mod rxpk;

pub use energy::{compute_energy, EnergyReport, DEFAULT_SUPPLY_VOLTAGE_V};
pub use metrics::{compute_metrics, link_breakdown, LinkStats, MeanMax, MetricsReport, Spread};
pub use min_period::{find_min_period_empirical, MinPeriodResult, MinPeriodSearch};
pub use rxpk::{emit_rxpk, format_rxpk, parse_rxpk, RxPk, RxpkError};

use thiserror::Error;

use crate::engine::EngineError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid energy input: {0}")]
    InvalidEnergyInput(&'static str),
    #[error("search bounds [{lo}, {hi}] ms do not bracket the minimum period: {reason}")]
    InvalidBracket { lo: u64, hi: u64, reason: &'static str },
    #[error("at least one radio is required")]
    ZeroRadios,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[cfg(test)]
mod tests;
