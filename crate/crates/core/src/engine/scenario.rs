use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::mac::{CsmaParams, DeadlinePolicy, MacKind};
use crate::node::Topology;
use crate::phy::MAX_PAYLOAD_LEN;
use crate::schedule::{
    generate_aperiodic, generate_periodic_for, staggered_phases, validate_schedule, Conflict, NodeTraffic, Schedule,
};

pub const DEFAULT_PAYLOAD_LEN: usize = 21;
/// Per-transmission bus setup overhead, calibrated so one SF7 radio with a
/// 21-byte payload needs about 90 ms per frame.
pub const DEFAULT_BUS_OVERHEAD_MS: f64 = 19.1;

/// Where the releases come from. Generated traffic takes each radio's SF and
/// channel from its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Traffic {
    Fixed { schedule: Schedule },
    /// One release per radio every `period_ms`. Without explicit phases the
    /// radios are staggered evenly across the period in topology order.
    Periodic { period_ms: u64, phases_ms: Option<Vec<u64>> },
    /// `events` releases spread uniformly over the horizon, assigned to radios
    /// round-robin. Without a seed the run seed is used.
    Aperiodic { events: usize, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MacPlan {
    Tdma { traffic: Traffic },
    Csma {
        traffic: Traffic,
        #[serde(default)]
        params: CsmaParams,
    },
}

impl MacPlan {
    pub fn kind(&self) -> MacKind {
        match self {
            MacPlan::Tdma { .. } => MacKind::Tdma,
            MacPlan::Csma { .. } => MacKind::Csma,
        }
    }

    pub fn traffic(&self) -> &Traffic {
        match self {
            MacPlan::Tdma { traffic } | MacPlan::Csma { traffic, .. } => traffic,
        }
    }
}

/// Which schedule conflicts stop a TDMA run before it starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationPolicy {
    /// Any bus or air conflict is fatal.
    #[default]
    Strict,
    /// Only bus conflicts are fatal; air conflicts are left to the gateway.
    BusOnly,
    /// Run whatever the schedule says.
    Off,
}

/// A channel occupied by transmitters outside the topology over
/// `[start_ms, end_ms)`. Occupied channels read busy to CSMA and destroy
/// any frame that overlaps them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusyWindow {
    pub channel_index: usize,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub topology: Topology,
    pub mac: MacPlan,
    pub horizon_ms: u64,
    #[serde(default = "default_payload_len")]
    pub payload_len: usize,
    #[serde(default = "default_bus_overhead")]
    pub bus_overhead_ms: f64,
    #[serde(default)]
    pub validation: ValidationPolicy,
    #[serde(default)]
    pub deadline: DeadlinePolicy,
    #[serde(default)]
    pub background: Vec<BusyWindow>,
    /// Sample every master's clock error at this interval.
    #[serde(default)]
    pub clock_sample_ms: Option<u64>,
}

fn default_payload_len() -> usize {
    DEFAULT_PAYLOAD_LEN
}

fn default_bus_overhead() -> f64 {
    DEFAULT_BUS_OVERHEAD_MS
}

impl Scenario {
    pub fn new(topology: Topology, mac: MacPlan, horizon_ms: u64) -> Self {
        Scenario {
            topology,
            mac,
            horizon_ms,
            payload_len: DEFAULT_PAYLOAD_LEN,
            bus_overhead_ms: DEFAULT_BUS_OVERHEAD_MS,
            validation: ValidationPolicy::default(),
            deadline: DeadlinePolicy::default(),
            background: Vec::new(),
            clock_sample_ms: None,
        }
    }

    /// Hex SHA-256 of the scenario's canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn traffic_of_radios(&self) -> Vec<NodeTraffic> {
        self.topology
            .masters
            .iter()
            .flat_map(|m| m.radios.iter())
            .map(|r| NodeTraffic {
                node_id: r.node_id,
                spreading_factor: r.config.spreading_factor,
                channel_index: r.config.channel_index,
            })
            .collect()
    }

    /// The concrete schedule this scenario runs under `seed`.
    pub fn resolve_schedule(&self, seed: u64) -> Result<Schedule, EngineError> {
        let horizon = self.horizon_ms;
        let schedule = match self.mac.traffic() {
            Traffic::Fixed { schedule } => schedule.clone(),
            Traffic::Periodic { period_ms, phases_ms } => {
                let traffic = self.traffic_of_radios();
                let phases = match phases_ms {
                    Some(p) if p.len() != traffic.len() => {
                        return Err(EngineError::InvalidScenario(format!(
                            "{} phases given for {} radios",
                            p.len(),
                            traffic.len()
                        )))
                    }
                    Some(p) => p.clone(),
                    None => staggered_phases(traffic.len(), *period_ms),
                };
                let pairs: Vec<(NodeTraffic, u64)> = traffic.into_iter().zip(phases).collect();
                generate_periodic_for(&pairs, *period_ms, horizon)?
            }
            Traffic::Aperiodic { events, seed: own } => {
                generate_aperiodic(&self.traffic_of_radios(), *events, horizon, own.unwrap_or(seed))?
            }
        };
        Ok(schedule)
    }

    /// Everything that can be checked without running: topology, MAC
    /// parameters, payload, background windows and, for TDMA, the schedule
    /// itself under the configured validation policy.
    pub fn validate(&self, schedule: &Schedule) -> Result<(), EngineError> {
        self.topology.validate()?;
        if self.horizon_ms == 0 {
            return Err(EngineError::InvalidScenario("horizon_ms must be positive".into()));
        }
        if self.payload_len > MAX_PAYLOAD_LEN {
            return Err(EngineError::InvalidScenario(format!(
                "payload_len {} exceeds {MAX_PAYLOAD_LEN}",
                self.payload_len
            )));
        }
        if !(self.bus_overhead_ms >= 0.0 && self.bus_overhead_ms.is_finite()) {
            return Err(EngineError::InvalidScenario("bus_overhead_ms must be non-negative".into()));
        }
        if let crate::mac::DeadlinePolicy::Relative { ms } = self.deadline {
            if !(ms >= 0.0 && ms.is_finite()) {
                return Err(EngineError::InvalidScenario("relative deadline must be non-negative".into()));
            }
        }
        if self.clock_sample_ms == Some(0) {
            return Err(EngineError::InvalidScenario("clock_sample_ms must be positive".into()));
        }
        let channels = &self.topology.channel_table;
        for w in &self.background {
            channels.frequency_hz(w.channel_index)?;
            if !(w.start_ms >= 0.0 && w.start_ms < w.end_ms) {
                return Err(EngineError::InvalidScenario(format!(
                    "background window [{}, {}) on channel {} is empty or negative",
                    w.start_ms, w.end_ms, w.channel_index
                )));
            }
        }
        if let MacPlan::Csma { params, .. } = &self.mac {
            params.validate(Some(channels))?;
        }
        let conflicts = validate_schedule(
            schedule,
            &self.topology.placements(),
            channels,
            self.payload_len,
            self.bus_overhead_ms,
        )?;
        let fatal: Vec<Conflict> = match (self.mac.kind(), self.validation) {
            (MacKind::Csma, _) | (_, ValidationPolicy::Off) => Vec::new(),
            (_, ValidationPolicy::BusOnly) => conflicts.into_iter().filter(|c| matches!(c, Conflict::Bus { .. })).collect(),
            (_, ValidationPolicy::Strict) => conflicts,
        };
        if let Some(&first) = fatal.first() {
            return Err(EngineError::Infeasible { count: fatal.len(), first });
        }
        Ok(())
    }
}
