//! LoRa air interface model.
//!
//! Everything here is a pure function of its inputs: airtime, transmit
//! timeouts, a log-distance link budget, per-SF demodulation floors and
//! collision arbitration between overlapping frames.

mod airtime;
mod collision;
mod link;

pub use airtime::{airtime, symbol_time_us, time_on_air, tx_timeout, uses_low_data_rate_optimize, MAX_PAYLOAD_LEN};
pub use collision::{arbitrate_collisions, FrameFate, FrameOnAir};
pub use link::{decodable, link_budget, LinkBudget, LinkModel, SnrFloors};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("spreading factor {0} outside 7..=12")]
    InvalidSpreadingFactor(u8),
    #[error("bandwidth {0} Hz is not one of 125000/250000/500000")]
    InvalidBandwidth(u32),
    #[error("coding rate {0} outside 1..=4")]
    InvalidCodingRate(u8),
    #[error("preamble length must be positive")]
    InvalidPreamble,
    #[error("channel index {index} out of range for a table of {len} channels")]
    ChannelOutOfRange { index: usize, len: usize },
    #[error("payload of {len} bytes exceeds the {max}-byte packet limit")]
    PayloadTooLong { len: usize, max: usize },
    #[error("channel table is empty")]
    EmptyChannelTable,
    #[error("channel frequencies must be strictly ascending")]
    ChannelsNotAscending,
    #[error("frequency {freq_hz} Hz outside band {low_hz}..={high_hz} Hz")]
    FrequencyOutOfBand { freq_hz: u64, low_hz: u64, high_hz: u64 },
    #[error("invalid link model: {0}")]
    InvalidLinkModel(String),
}

/// Channel bandwidth. Only the three LoRa bandwidths used by SX126x gateways
/// are legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Bandwidth {
    Khz125,
    Khz250,
    Khz500,
}

impl Bandwidth {
    pub const fn hz(self) -> u32 {
        match self {
            Bandwidth::Khz125 => 125_000,
            Bandwidth::Khz250 => 250_000,
            Bandwidth::Khz500 => 500_000,
        }
    }

    pub const fn khz(self) -> u32 {
        self.hz() / 1_000
    }

    pub const ALL: [Bandwidth; 3] = [Bandwidth::Khz125, Bandwidth::Khz250, Bandwidth::Khz500];
}

impl TryFrom<u32> for Bandwidth {
    type Error = PhyError;

    fn try_from(hz: u32) -> Result<Self, PhyError> {
        match hz {
            125_000 => Ok(Bandwidth::Khz125),
            250_000 => Ok(Bandwidth::Khz250),
            500_000 => Ok(Bandwidth::Khz500),
            other => Err(PhyError::InvalidBandwidth(other)),
        }
    }
}

impl From<Bandwidth> for u32 {
    fn from(bw: Bandwidth) -> u32 {
        bw.hz()
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BW{}", self.khz())
    }
}

/// Per-radio air parameters.
///
/// `coding_rate` is the CR index: the FEC ratio is `4/(4+CR)`, so 3 means 4/7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub spreading_factor: u8,
    #[serde(rename = "bandwidth_hz")]
    pub bandwidth: Bandwidth,
    pub coding_rate: u8,
    pub channel_index: usize,
    pub tx_power_dbm: f64,
    pub preamble_symbols: u16,
    pub crc_enabled: bool,
    pub explicit_header: bool,
}

impl Default for RadioConfig {
    /// SF7 / 125 kHz / 4/7, 8-symbol preamble, CRC on, explicit header, 0 dBm.
    fn default() -> Self {
        RadioConfig {
            spreading_factor: 7,
            bandwidth: Bandwidth::Khz125,
            coding_rate: 3,
            channel_index: 0,
            tx_power_dbm: 0.0,
            preamble_symbols: 8,
            crc_enabled: true,
            explicit_header: true,
        }
    }
}

impl RadioConfig {
    pub fn with_spreading_factor(mut self, sf: u8) -> Self {
        self.spreading_factor = sf;
        self
    }

    pub fn with_channel(mut self, channel_index: usize) -> Self {
        self.channel_index = channel_index;
        self
    }

    /// Checks the parameter ranges. The channel index is only checked when a
    /// table is supplied.
    pub fn validate(&self, channels: Option<&ChannelTable>) -> Result<(), PhyError> {
        check_spreading_factor(self.spreading_factor)?;
        if !(1..=4).contains(&self.coding_rate) {
            return Err(PhyError::InvalidCodingRate(self.coding_rate));
        }
        if self.preamble_symbols == 0 {
            return Err(PhyError::InvalidPreamble);
        }
        if let Some(table) = channels {
            table.frequency_hz(self.channel_index)?;
        }
        Ok(())
    }

    /// `"SF12BW125"` style data-rate string.
    pub fn data_rate(&self) -> String {
        format!("SF{}{}", self.spreading_factor, self.bandwidth)
    }

    /// `"4/7"` style coding-rate string.
    pub fn coding_rate_label(&self) -> String {
        format!("4/{}", 4 + self.coding_rate)
    }
}

pub fn check_spreading_factor(sf: u8) -> Result<(), PhyError> {
    if (7..=12).contains(&sf) {
        Ok(())
    } else {
        Err(PhyError::InvalidSpreadingFactor(sf))
    }
}

/// EU868 band edges.
pub const EU868_BAND_HZ: (u64, u64) = (863_000_000, 870_000_000);

/// Ordered list of carrier frequencies. Radios and schedules refer to
/// channels by index into this table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelTable")]
pub struct ChannelTable {
    frequencies_hz: Vec<u64>,
    band_hz: (u64, u64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannelTable {
    frequencies_hz: Vec<u64>,
    #[serde(default = "eu868")]
    band_hz: (u64, u64),
}

fn eu868() -> (u64, u64) {
    EU868_BAND_HZ
}

impl TryFrom<RawChannelTable> for ChannelTable {
    type Error = PhyError;
    fn try_from(raw: RawChannelTable) -> Result<Self, PhyError> {
        ChannelTable::with_band(raw.frequencies_hz, raw.band_hz)
    }
}

impl ChannelTable {
    /// A table within the EU868 band.
    pub fn new(frequencies_hz: Vec<u64>) -> Result<Self, PhyError> {
        Self::with_band(frequencies_hz, EU868_BAND_HZ)
    }

    pub fn with_band(frequencies_hz: Vec<u64>, band_hz: (u64, u64)) -> Result<Self, PhyError> {
        if frequencies_hz.is_empty() {
            return Err(PhyError::EmptyChannelTable);
        }
        if frequencies_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PhyError::ChannelsNotAscending);
        }
        let (low_hz, high_hz) = band_hz;
        if let Some(&freq_hz) = frequencies_hz.iter().find(|&&f| f < low_hz || f > high_hz) {
            return Err(PhyError::FrequencyOutOfBand { freq_hz, low_hz, high_hz });
        }
        Ok(ChannelTable { frequencies_hz, band_hz })
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    pub fn frequencies_hz(&self) -> &[u64] {
        &self.frequencies_hz
    }

    pub fn frequency_hz(&self, index: usize) -> Result<u64, PhyError> {
        self.frequencies_hz
            .get(index)
            .copied()
            .ok_or(PhyError::ChannelOutOfRange { index, len: self.frequencies_hz.len() })
    }

    pub fn index_of(&self, freq_hz: u64) -> Option<usize> {
        self.frequencies_hz.iter().position(|&f| f == freq_hz)
    }
}

impl Default for ChannelTable {
    /// The eight EU868 uplink channels 867.1 .. 868.5 MHz.
    fn default() -> Self {
        ChannelTable::new((0..8).map(|i| 867_100_000 + i * 200_000).collect())
            .expect("default table is valid")
    }
}
