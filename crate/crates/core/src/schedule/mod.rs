//! Transmission schedules: the data model, periodic and aperiodic generators,
//! feasibility checks and the capacity planners.

mod capacity;
mod validate;

pub use capacity::{
    max_radios_per_master, memory_footprint, memory_footprint_days, power_budget, CapacityBudget, CapacityError,
    PowerReport, SECONDS_PER_DAY, SHARED_SPI_PINS,
};
pub use validate::{validate_schedule, Conflict, Placement};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{self, PhyError, RadioConfig};
use crate::rng::{substream, Substream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("at least one node is required")]
    ZeroNodes,
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("{what} has {got} entries, expected one per node ({nodes})")]
    LengthMismatch { what: &'static str, got: usize, nodes: usize },
    #[error("phase {phase_ms} ms of node {node} is not below the period {period_ms} ms")]
    PhaseNotBelowPeriod { node: u32, phase_ms: u64, period_ms: u64 },
    #[error("event {index} is out of order")]
    Unsorted { index: usize },
    #[error("event {index} at {t_ms} ms lies beyond the horizon {horizon_ms} ms")]
    BeyondHorizon { index: usize, t_ms: u64, horizon_ms: u64 },
    #[error("event {index} of node {node} breaks the {period_ms} ms period")]
    NotPeriodic { index: usize, node: u32, period_ms: u64 },
    #[error("schedule references unknown node {0}")]
    UnknownNode(u32),
    #[error("at least one radio per bus is required")]
    ZeroRadios,
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("malformed schedule JSON: {0}")]
    Json(String),
}

/// One scheduled transmission: node `node_id` transmits at `release_time_ms`
/// with the given SF on the given channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEvent {
    #[serde(rename = "node")]
    pub node_id: u32,
    #[serde(rename = "t_ms")]
    pub release_time_ms: u64,
    #[serde(rename = "sf")]
    pub spreading_factor: u8,
    #[serde(rename = "ch")]
    pub channel_index: usize,
}

impl ScheduleEvent {
    fn sort_key(&self) -> (u64, u32) {
        (self.release_time_ms, self.node_id)
    }
}

/// The traffic one node contributes to a generated schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTraffic {
    pub node_id: u32,
    pub spreading_factor: u8,
    pub channel_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct Schedule {
    events: Vec<ScheduleEvent>,
    horizon_ms: u64,
    period_ms: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    horizon_ms: u64,
    period_ms: Option<u64>,
    events: Vec<ScheduleEvent>,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = ScheduleError;
    fn try_from(raw: RawSchedule) -> Result<Self, ScheduleError> {
        Schedule::new(raw.events, raw.horizon_ms, raw.period_ms)
    }
}

impl From<Schedule> for RawSchedule {
    fn from(s: Schedule) -> Self {
        RawSchedule { horizon_ms: s.horizon_ms, period_ms: s.period_ms, events: s.events }
    }
}

impl Schedule {
    /// Builds a schedule, rejecting unsorted events, events past the horizon,
    /// invalid SFs and (when periodic) releases off their node's period grid.
    pub fn new(events: Vec<ScheduleEvent>, horizon_ms: u64, period_ms: Option<u64>) -> Result<Self, ScheduleError> {
        if horizon_ms == 0 {
            return Err(ScheduleError::ZeroHorizon);
        }
        if period_ms == Some(0) {
            return Err(ScheduleError::ZeroPeriod);
        }
        for (index, pair) in events.windows(2).enumerate() {
            if pair[1].sort_key() < pair[0].sort_key() {
                return Err(ScheduleError::Unsorted { index: index + 1 });
            }
        }
        let mut phase_of = std::collections::BTreeMap::new();
        for (index, ev) in events.iter().enumerate() {
            phy::check_spreading_factor(ev.spreading_factor)?;
            if ev.release_time_ms > horizon_ms {
                return Err(ScheduleError::BeyondHorizon { index, t_ms: ev.release_time_ms, horizon_ms });
            }
            if let Some(p) = period_ms {
                let phase = *phase_of.entry(ev.node_id).or_insert(ev.release_time_ms % p);
                if ev.release_time_ms % p != phase {
                    return Err(ScheduleError::NotPeriodic { index, node: ev.node_id, period_ms: p });
                }
            }
        }
        Ok(Schedule { events, horizon_ms, period_ms })
    }

    pub fn empty(horizon_ms: u64) -> Result<Self, ScheduleError> {
        Schedule::new(Vec::new(), horizon_ms, None)
    }

    pub fn events(&self) -> &[ScheduleEvent] {
        &self.events
    }

    pub fn horizon_ms(&self) -> u64 {
        self.horizon_ms
    }

    pub fn period_ms(&self) -> Option<u64> {
        self.period_ms
    }

    pub fn is_periodic(&self) -> bool {
        self.period_ms.is_some()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Canonical JSON text. `from_json(to_json(s)) == s` and re-serializing the
    /// parsed value reproduces the same bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        serde_json::from_str(text).map_err(|e| ScheduleError::Json(e.to_string()))
    }
}

/// Periodic schedule with node ids `0..nodes`.
pub fn generate_periodic(
    nodes: usize,
    period_ms: u64,
    phase_offsets_ms: &[u64],
    sf_per_node: &[u8],
    ch_per_node: &[usize],
    horizon_ms: u64,
) -> Result<Schedule, ScheduleError> {
    if nodes == 0 {
        return Err(ScheduleError::ZeroNodes);
    }
    for (what, got) in [("phase list", phase_offsets_ms.len()), ("SF list", sf_per_node.len()), ("channel list", ch_per_node.len())] {
        if got != nodes {
            return Err(ScheduleError::LengthMismatch { what, got, nodes });
        }
    }
    let traffic: Vec<(NodeTraffic, u64)> = (0..nodes)
        .map(|i| {
            let t = NodeTraffic { node_id: i as u32, spreading_factor: sf_per_node[i], channel_index: ch_per_node[i] };
            (t, phase_offsets_ms[i])
        })
        .collect();
    generate_periodic_for(&traffic, period_ms, horizon_ms)
}

/// Periodic schedule for explicit `(traffic, phase_ms)` pairs. Each node gets
/// `floor((horizon - phase) / period) + 1` releases.
pub fn generate_periodic_for(
    traffic: &[(NodeTraffic, u64)],
    period_ms: u64,
    horizon_ms: u64,
) -> Result<Schedule, ScheduleError> {
    if traffic.is_empty() {
        return Err(ScheduleError::ZeroNodes);
    }
    if period_ms == 0 {
        return Err(ScheduleError::ZeroPeriod);
    }
    let mut events = Vec::new();
    for &(t, phase_ms) in traffic {
        if phase_ms >= period_ms {
            return Err(ScheduleError::PhaseNotBelowPeriod { node: t.node_id, phase_ms, period_ms });
        }
        let mut release = phase_ms;
        while release <= horizon_ms {
            events.push(ScheduleEvent {
                node_id: t.node_id,
                release_time_ms: release,
                spreading_factor: t.spreading_factor,
                channel_index: t.channel_index,
            });
            release += period_ms;
        }
    }
    events.sort_by_key(ScheduleEvent::sort_key);
    Schedule::new(events, horizon_ms, Some(period_ms))
}

/// Evenly staggered phases `i * period / nodes`.
pub fn staggered_phases(nodes: usize, period_ms: u64) -> Vec<u64> {
    (0..nodes as u64).map(|i| i * period_ms / nodes.max(1) as u64).collect()
}

/// Aperiodic schedule: event `i` belongs to `traffic[i % n]`, releases are
/// uniform integers over `[0, horizon_ms]` drawn from the seed's aperiodic
/// substream.
pub fn generate_aperiodic(
    traffic: &[NodeTraffic],
    total_events: usize,
    horizon_ms: u64,
    seed: u64,
) -> Result<Schedule, ScheduleError> {
    if total_events == 0 {
        return Schedule::empty(horizon_ms);
    }
    if traffic.is_empty() {
        return Err(ScheduleError::ZeroNodes);
    }
    let mut rng = substream(seed, Substream::Aperiodic);
    let mut events: Vec<ScheduleEvent> = (0..total_events)
        .map(|i| {
            let t = traffic[i % traffic.len()];
            ScheduleEvent {
                node_id: t.node_id,
                release_time_ms: rng.random_range(0..=horizon_ms),
                spreading_factor: t.spreading_factor,
                channel_index: t.channel_index,
            }
        })
        .collect();
    events.sort_by_key(ScheduleEvent::sort_key);
    Schedule::new(events, horizon_ms, None)
}

/// Smallest period at which `radios_on_bus` radios sharing one bus can each
/// send one frame per period: every radio holds the bus for its airtime plus
/// the per-transmission overhead.
pub fn min_period(
    sf: u8,
    payload_len: usize,
    radios_on_bus: usize,
    bus_overhead_ms: f64,
    cfg: &RadioConfig,
) -> Result<f64, ScheduleError> {
    if radios_on_bus == 0 {
        return Err(ScheduleError::ZeroRadios);
    }
    let toa = phy::time_on_air(&cfg.with_spreading_factor(sf), payload_len)?;
    Ok(radios_on_bus as f64 * (toa + bus_overhead_ms))
}
