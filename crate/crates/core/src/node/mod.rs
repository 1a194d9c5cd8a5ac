//! Platform model: masters with their radios, the serialized bus each master
//! drives, drifting clocks with periodic correction, and gateway placement.

mod bus;
mod clock;

pub use bus::{BusError, BusGrant, BusState};
pub use clock::{local_to_global, ClockModel, ClockTrajectory};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{ChannelTable, LinkModel, PhyError, RadioConfig};
use crate::schedule::{power_budget, CapacityBudget, CapacityError, Placement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology has no masters")]
    NoMasters,
    #[error("topology has no radios")]
    NoRadios,
    #[error("master id {0} is used twice")]
    DuplicateMaster(u32),
    #[error("node id {0} is used twice")]
    DuplicateNode(u32),
    #[error("master {master} hosts {radios} radios but its GPIO budget allows {max}")]
    TooManyRadios { master: u32, radios: usize, max: u32 },
    #[error("master {0} cannot power even one transmitting radio")]
    NoTxPower(u32),
    #[error("radio {node}: {source}")]
    Radio { node: u32, source: PhyError },
    #[error("master {master}: {source}")]
    Budget { master: u32, source: CapacityError },
    #[error("master {master}: invalid clock: {reason}")]
    Clock { master: u32, reason: String },
    #[error(transparent)]
    Phy(#[from] PhyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSpec {
    pub node_id: u32,
    #[serde(default)]
    pub config: RadioConfig,
}

/// One master board (a Raspberry Pi in the reference testbed) and the radios
/// hanging off its bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSpec {
    pub master_id: u32,
    pub radios: Vec<RadioSpec>,
    #[serde(default)]
    pub position_m: [f64; 2],
    #[serde(default)]
    pub clock: ClockModel,
    #[serde(default)]
    pub budget: CapacityBudget,
}

pub const DEFAULT_GATEWAY_POSITION_M: [f64; 2] = [50.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub masters: Vec<MasterSpec>,
    #[serde(default = "default_gateway")]
    pub gateway_position_m: [f64; 2],
    #[serde(default)]
    pub channel_table: ChannelTable,
    #[serde(default)]
    pub link_model: LinkModel,
}

fn default_gateway() -> [f64; 2] {
    DEFAULT_GATEWAY_POSITION_M
}

impl Topology {
    /// One master at the origin hosting the given radios; gateway at the
    /// default 50 m.
    pub fn single_master(radios: Vec<RadioSpec>) -> Self {
        Topology {
            masters: vec![MasterSpec {
                master_id: 0,
                radios,
                position_m: [0.0, 0.0],
                clock: ClockModel::default(),
                budget: CapacityBudget::default(),
            }],
            gateway_position_m: DEFAULT_GATEWAY_POSITION_M,
            channel_table: ChannelTable::default(),
            link_model: LinkModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.masters.is_empty() {
            return Err(TopologyError::NoMasters);
        }
        if self.masters.iter().all(|m| m.radios.is_empty()) {
            return Err(TopologyError::NoRadios);
        }
        self.link_model.validate()?;
        let mut masters = BTreeSet::new();
        let mut nodes = BTreeSet::new();
        for m in &self.masters {
            if !masters.insert(m.master_id) {
                return Err(TopologyError::DuplicateMaster(m.master_id));
            }
            m.budget.validate().map_err(|source| TopologyError::Budget { master: m.master_id, source })?;
            let max = m.budget.max_radios().map_err(|source| TopologyError::Budget { master: m.master_id, source })?;
            if m.radios.len() > max as usize {
                return Err(TopologyError::TooManyRadios { master: m.master_id, radios: m.radios.len(), max });
            }
            if !m.radios.is_empty() {
                let power = power_budget(&m.budget, 1).map_err(|source| TopologyError::Budget { master: m.master_id, source })?;
                if power.max_concurrent_tx == 0 {
                    return Err(TopologyError::NoTxPower(m.master_id));
                }
            }
            m.clock.validate().map_err(|reason| TopologyError::Clock { master: m.master_id, reason })?;
            for r in &m.radios {
                if !nodes.insert(r.node_id) {
                    return Err(TopologyError::DuplicateNode(r.node_id));
                }
                r.config
                    .validate(Some(&self.channel_table))
                    .map_err(|source| TopologyError::Radio { node: r.node_id, source })?;
            }
        }
        Ok(())
    }

    /// Bus membership of every radio, keyed by master id.
    pub fn placements(&self) -> Vec<Placement> {
        self.masters
            .iter()
            .flat_map(|m| m.radios.iter().map(move |r| Placement { node_id: r.node_id, bus_id: m.master_id, config: r.config }))
            .collect()
    }

    pub fn radio_count(&self) -> usize {
        self.masters.iter().map(|m| m.radios.len()).sum()
    }

    pub fn distance_to_gateway_m(&self, master: &MasterSpec) -> f64 {
        let dx = master.position_m[0] - self.gateway_position_m[0];
        let dy = master.position_m[1] - self.gateway_position_m[1];
        dx.hypot(dy)
    }
}
