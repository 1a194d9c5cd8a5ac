use loratb::node::{ClockModel, MasterSpec, RadioSpec, Topology};
use loratb::phy::RadioConfig;
use loratb::schedule::{
    generate_aperiodic, generate_periodic, staggered_phases, validate_schedule, CapacityBudget, Conflict, NodeTraffic,
    Schedule,
};

use crate::error::CliError;

/// Inputs of `gen-schedule`, after flag parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct GenScheduleRequest {
    pub nodes: usize,
    pub horizon_ms: u64,
    /// One value for every node or one per node.
    pub sf: Vec<u8>,
    pub ch: Vec<usize>,
    pub kind: TrafficKind,
    /// Radios sharing each master's bus, used for the conflict check.
    /// Node `i` sits on master `i / radios_per_master`.
    pub radios_per_master: usize,
    pub payload_len: usize,
    pub bus_overhead_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficKind {
    Periodic { period_ms: u64, phases_ms: Option<Vec<u64>> },
    Aperiodic { events: usize, seed: u64 },
}

fn per_node<T: Copy>(values: &[T], nodes: usize, what: &str) -> Result<Vec<T>, CliError> {
    match values.len() {
        1 => Ok(vec![values[0]; nodes]),
        n if n == nodes => Ok(values.to_vec()),
        n => Err(CliError::usage(format!("--{what} takes 1 or {nodes} values, got {n}"))),
    }
}

impl GenScheduleRequest {
    /// Topology used to check the schedule: nodes packed onto masters in
    /// order, every radio at the requested SF and channel.
    pub fn topology(&self) -> Result<Topology, CliError> {
        let sf = per_node(&self.sf, self.nodes, "sf")?;
        let ch = per_node(&self.ch, self.nodes, "ch")?;
        let per = self.radios_per_master.max(1);
        let masters = (0..self.nodes)
            .collect::<Vec<_>>()
            .chunks(per)
            .enumerate()
            .map(|(m, ids)| MasterSpec {
                master_id: m as u32,
                radios: ids
                    .iter()
                    .map(|&i| RadioSpec {
                        node_id: i as u32,
                        config: RadioConfig::default().with_spreading_factor(sf[i]).with_channel(ch[i]),
                    })
                    .collect(),
                position_m: [0.0, 0.0],
                clock: ClockModel::default(),
                budget: CapacityBudget { gpio_pins_total: u32::MAX, ..CapacityBudget::default() },
            })
            .collect();
        Ok(Topology { masters, ..Topology::single_master(Vec::new()) })
    }

    pub fn generate(&self) -> Result<Schedule, CliError> {
        if self.nodes == 0 {
            return Err(CliError::usage("--nodes must be at least 1"));
        }
        let sf = per_node(&self.sf, self.nodes, "sf")?;
        let ch = per_node(&self.ch, self.nodes, "ch")?;
        let schedule = match &self.kind {
            TrafficKind::Periodic { period_ms, phases_ms } => {
                let phases = match phases_ms {
                    Some(p) => per_node(p, self.nodes, "phases-ms")?,
                    None => staggered_phases(self.nodes, *period_ms),
                };
                generate_periodic(self.nodes, *period_ms, &phases, &sf, &ch, self.horizon_ms)
            }
            TrafficKind::Aperiodic { events, seed } => {
                let traffic: Vec<NodeTraffic> = (0..self.nodes)
                    .map(|i| NodeTraffic { node_id: i as u32, spreading_factor: sf[i], channel_index: ch[i] })
                    .collect();
                generate_aperiodic(&traffic, *events, self.horizon_ms, *seed)
            }
        };
        schedule.map_err(|e| CliError::usage(e.to_string()))
    }

    /// Bus and air conflicts of `schedule` on this request's topology.
    pub fn conflicts(&self, schedule: &Schedule) -> Result<Vec<Conflict>, CliError> {
        let topo = self.topology()?;
        validate_schedule(schedule, &topo.placements(), &topo.channel_table, self.payload_len, self.bus_overhead_ms)
            .map_err(CliError::validation)
    }
}
