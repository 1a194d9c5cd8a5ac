//! Scenario configuration files.
//!
//! A config is a TOML document describing one experiment: the masters and
//! their radios, the MAC and its traffic, link, clock and energy parameters,
//! the horizon, the list of seeds to run and where results go. Relative paths
//! inside a config resolve against the directory holding it.
//!
//! ```toml
//! name = "sf-sweep"
//! horizon_ms = 60000
//! seeds = [1, 2, 3]
//! output_dir = "../out/sf_sweep"
//!
//! [mac]
//! kind = "tdma"
//! traffic = { kind = "periodic", period_ms = 1000 }
//!
//! [[topology.masters]]
//! master_id = 0
//! radios = [
//!     { node_id = 0, spreading_factor = 7, channel_index = 1 },
//!     { node_id = 1, spreading_factor = 8, channel_index = 1 },
//! ]
//! ```

use std::path::{Path, PathBuf};

use loratb::engine::{BusyWindow, MacPlan, Scenario, Traffic, ValidationPolicy, DEFAULT_BUS_OVERHEAD_MS, DEFAULT_PAYLOAD_LEN};
use loratb::mac::{CsmaParams, DeadlinePolicy};
use loratb::node::{ClockModel, MasterSpec, RadioSpec, Topology, DEFAULT_GATEWAY_POSITION_M};
use loratb::phy::{Bandwidth, ChannelTable, LinkModel, RadioConfig};
use loratb::schedule::{CapacityBudget, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::read_to_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    /// Required unless the MAC section points at a schedule file, whose
    /// horizon is then used.
    #[serde(default)]
    pub horizon_ms: Option<u64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_payload_len")]
    pub payload_len: usize,
    #[serde(default = "default_bus_overhead")]
    pub bus_overhead_ms: f64,
    #[serde(default)]
    pub validation: ValidationPolicy,
    #[serde(default)]
    pub deadline: DeadlinePolicy,
    #[serde(default)]
    pub clock_sample_ms: Option<u64>,
    pub topology: TopologySection,
    pub mac: MacSection,
    #[serde(default)]
    pub link: LinkModel,
    /// Applied to every master.
    #[serde(default)]
    pub clock: ClockModel,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub background: Vec<BusyWindow>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_payload_len() -> usize {
    DEFAULT_PAYLOAD_LEN
}

fn default_bus_overhead() -> f64 {
    DEFAULT_BUS_OVERHEAD_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub masters: Vec<MasterSection>,
    #[serde(default = "default_gateway")]
    pub gateway_position_m: [f64; 2],
    /// Channel frequencies; the eight EU868 uplink channels when omitted.
    #[serde(default)]
    pub channels_hz: Option<Vec<u64>>,
}

fn default_gateway() -> [f64; 2] {
    DEFAULT_GATEWAY_POSITION_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSection {
    pub master_id: u32,
    #[serde(default)]
    pub position_m: [f64; 2],
    #[serde(default)]
    pub budget: CapacityBudget,
    pub radios: Vec<RadioSection>,
}

/// One radio. Omitted air parameters take the SF7 / 125 kHz / 4/7 defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    pub node_id: u32,
    pub spreading_factor: Option<u8>,
    pub bandwidth_hz: Option<u32>,
    pub coding_rate: Option<u8>,
    pub channel_index: Option<usize>,
    pub tx_power_dbm: Option<f64>,
    pub preamble_symbols: Option<u16>,
    pub crc_enabled: Option<bool>,
    pub explicit_header: Option<bool>,
}

impl RadioSection {
    fn to_spec(&self) -> Result<RadioSpec, CliError> {
        let d = RadioConfig::default();
        let bandwidth = match self.bandwidth_hz {
            Some(hz) => Bandwidth::try_from(hz).map_err(|e| CliError::validation(format!("radio {}: {e}", self.node_id)))?,
            None => d.bandwidth,
        };
        Ok(RadioSpec {
            node_id: self.node_id,
            config: RadioConfig {
                spreading_factor: self.spreading_factor.unwrap_or(d.spreading_factor),
                bandwidth,
                coding_rate: self.coding_rate.unwrap_or(d.coding_rate),
                channel_index: self.channel_index.unwrap_or(d.channel_index),
                tx_power_dbm: self.tx_power_dbm.unwrap_or(d.tx_power_dbm),
                preamble_symbols: self.preamble_symbols.unwrap_or(d.preamble_symbols),
                crc_enabled: self.crc_enabled.unwrap_or(d.crc_enabled),
                explicit_header: self.explicit_header.unwrap_or(d.explicit_header),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacChoice {
    Tdma,
    Csma,
}

/// Exactly one of `schedule` (a schedule JSON file) and `traffic` (generated
/// releases) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacSection {
    pub kind: MacChoice,
    #[serde(default)]
    pub schedule: Option<PathBuf>,
    #[serde(default)]
    pub traffic: Option<Traffic>,
    #[serde(default)]
    pub csma: CsmaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub supply_voltage_v: f64,
    pub tx_current_a: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            supply_voltage_v: loratb::analysis::DEFAULT_SUPPLY_VOLTAGE_V,
            tx_current_a: CapacityBudget::default().radio_tx_current_a,
        }
    }
}

/// A config with every reference resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    /// Output directory, already resolved against the config's location.
    pub output_dir: PathBuf,
}

impl LoadedConfig {
    pub fn backoff_energy_mj(&self) -> f64 {
        match &self.scenario.mac {
            MacPlan::Csma { params, .. } => params.backoff_energy_mj,
            MacPlan::Tdma { .. } => CsmaParams::default().backoff_energy_mj,
        }
    }

    /// The same experiment under the other MAC, keeping traffic and CSMA
    /// parameters.
    pub fn with_mac(&self, mac: MacChoice) -> LoadedConfig {
        let traffic = self.scenario.mac.traffic().clone();
        let mut out = self.clone();
        out.scenario.mac = match mac {
            MacChoice::Tdma => MacPlan::Tdma { traffic },
            MacChoice::Csma => MacPlan::Csma { traffic, params: self.config.mac.csma.clone() },
        };
        out.config.mac.kind = mac;
        out
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = read_to_string(path)?;
    let config = parse_config(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    resolve(config, base)
}

/// Turns a parsed config into a runnable scenario. Relative paths resolve
/// against `base`.
pub fn resolve(config: ScenarioConfig, base: &Path) -> Result<LoadedConfig, CliError> {
    if config.seeds.is_empty() {
        return Err(CliError::validation("config: `seeds` must list at least one seed"));
    }
    let channel_table = match &config.topology.channels_hz {
        Some(f) => ChannelTable::new(f.clone()).map_err(|e| CliError::validation(format!("config: channels_hz: {e}")))?,
        None => ChannelTable::default(),
    };
    let mut masters = Vec::new();
    for m in &config.topology.masters {
        masters.push(MasterSpec {
            master_id: m.master_id,
            radios: m.radios.iter().map(RadioSection::to_spec).collect::<Result<_, _>>()?,
            position_m: m.position_m,
            clock: config.clock,
            budget: m.budget,
        });
    }
    let topology = Topology {
        masters,
        gateway_position_m: config.topology.gateway_position_m,
        channel_table,
        link_model: config.link,
    };

    let (traffic, schedule_horizon) = match (&config.mac.schedule, &config.mac.traffic) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation("config: [mac] takes either `schedule` or `traffic`, not both"))
        }
        (None, None) => return Err(CliError::validation("config: [mac] needs `schedule` or `traffic`")),
        (Some(rel), None) => {
            let path = base.join(rel);
            if !path.is_file() {
                return Err(CliError::validation(format!("config: schedule file {} does not exist", path.display())));
            }
            let schedule = Schedule::from_json(&read_to_string(&path)?)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let horizon = schedule.horizon_ms();
            (Traffic::Fixed { schedule }, Some(horizon))
        }
        (None, Some(t)) => (t.clone(), None),
    };
    let horizon_ms = config
        .horizon_ms
        .or(schedule_horizon)
        .ok_or_else(|| CliError::validation("config: `horizon_ms` is required with generated traffic"))?;

    let mac = match config.mac.kind {
        MacChoice::Tdma => MacPlan::Tdma { traffic },
        MacChoice::Csma => MacPlan::Csma { traffic, params: config.mac.csma.clone() },
    };
    let mut scenario = Scenario::new(topology, mac, horizon_ms);
    scenario.payload_len = config.payload_len;
    scenario.bus_overhead_ms = config.bus_overhead_ms;
    scenario.validation = config.validation;
    scenario.deadline = config.deadline;
    scenario.background = config.background.clone();
    scenario.clock_sample_ms = config.clock_sample_ms;

    let e = config.energy;
    if !(e.supply_voltage_v > 0.0 && e.tx_current_a > 0.0) {
        return Err(CliError::validation("config: [energy] voltage and current must be positive"));
    }

    let output_dir = base.join(&config.output_dir);
    Ok(LoadedConfig { config, scenario, output_dir })
}
