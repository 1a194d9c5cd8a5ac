//! Packet-forwarder `rxpk` JSON-lines codec.
//!
//! Each line is one object `{"rxpk":[{...}]}`. Fields are written in a fixed
//! order so that logs diff cleanly:
//! `tmst, chan, rfch, freq, stat, modu, datr, codr, lsnr, rssi, size, data`.

use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::Reception;
use crate::phy::{check_spreading_factor, Bandwidth, ChannelTable, PhyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RxpkError {
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: invalid `{field}`: {reason}")]
    InvalidField { line: usize, field: &'static str, reason: String },
    #[error("line {line}: undecodable base64 in `data`: {message}")]
    Base64 { line: usize, message: String },
}

/// One received uplink as the gateway logs it.
#[derive(Debug, Clone, PartialEq)]
pub struct RxPk {
    /// Concentrator microsecond counter, wrapping at 2^32.
    pub tmst: u32,
    pub chan: u32,
    pub rfch: u32,
    pub freq_hz: u64,
    pub stat: i32,
    pub spreading_factor: u8,
    pub bandwidth: Bandwidth,
    /// CR index: `codr` is `4/(4 + coding_rate)`.
    pub coding_rate: u8,
    /// Tenths of a dB.
    pub lsnr_db: f64,
    pub rssi_dbm: i32,
    pub data: Vec<u8>,
}

impl RxPk {
    /// Gateway view of a simulated reception. SNR is quantized to 0.1 dB and
    /// RSSI to 1 dB, as the forwarder reports them.
    pub fn from_reception(r: &Reception, channels: &ChannelTable) -> Result<Self, PhyError> {
        Ok(RxPk {
            tmst: (r.arrival.as_us() & 0xFFFF_FFFF) as u32,
            chan: r.channel_index as u32,
            rfch: 0,
            freq_hz: channels.frequency_hz(r.channel_index)?,
            stat: 1,
            spreading_factor: r.spreading_factor,
            bandwidth: r.bandwidth,
            coding_rate: r.coding_rate,
            lsnr_db: (r.snr_db * 10.0).round() / 10.0,
            rssi_dbm: r.rssi_dbm.round() as i32,
            data: r.payload.clone(),
        })
    }

    pub fn datr(&self) -> String {
        format!("SF{}{}", self.spreading_factor, self.bandwidth)
    }

    pub fn codr(&self) -> String {
        format!("4/{}", 4 + self.coding_rate)
    }

    pub fn freq_mhz(&self) -> f64 {
        self.freq_hz as f64 / 1e6
    }

    fn write_json(&self, out: &mut String) {
        write!(
            out,
            "{{\"rxpk\":[{{\"tmst\":{},\"chan\":{},\"rfch\":{},\"freq\":{:.6},\"stat\":{},\"modu\":\"LORA\",\
             \"datr\":\"{}\",\"codr\":\"{}\",\"lsnr\":{:.1},\"rssi\":{},\"size\":{},\"data\":\"{}\"}}]}}",
            self.tmst,
            self.chan,
            self.rfch,
            self.freq_mhz(),
            self.stat,
            self.datr(),
            self.codr(),
            self.lsnr_db,
            self.rssi_dbm,
            self.data.len(),
            STANDARD.encode(&self.data),
        )
        .expect("writing to a String");
    }
}

/// One line per reception, in the order given.
pub fn emit_rxpk(receptions: &[Reception], channels: &ChannelTable) -> Result<String, PhyError> {
    let packets = receptions.iter().map(|r| RxPk::from_reception(r, channels)).collect::<Result<Vec<_>, _>>()?;
    Ok(format_rxpk(&packets))
}

pub fn format_rxpk(packets: &[RxPk]) -> String {
    let mut out = String::new();
    for p in packets {
        p.write_json(&mut out);
        out.push('\n');
    }
    out
}

/// Parses rxpk JSON lines. Blank lines are skipped; unknown fields are
/// ignored; errors name the 1-based line.
pub fn parse_rxpk(text: &str) -> Result<Vec<RxPk>, RxpkError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw).map_err(|e| RxpkError::Json { line, message: e.to_string() })?;
        let list = value
            .get("rxpk")
            .ok_or(RxpkError::MissingField { line, field: "rxpk" })?
            .as_array()
            .ok_or_else(|| invalid(line, "rxpk", "not an array"))?;
        for item in list {
            let obj = item.as_object().ok_or_else(|| invalid(line, "rxpk", "entry is not an object"))?;
            out.push(parse_packet(obj, line)?);
        }
    }
    Ok(out)
}

fn invalid(line: usize, field: &'static str, reason: impl Into<String>) -> RxpkError {
    RxpkError::InvalidField { line, field, reason: reason.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, line: usize, name: &'static str) -> Result<&'a Value, RxpkError> {
    obj.get(name).ok_or(RxpkError::MissingField { line, field: name })
}

fn uint(obj: &Map<String, Value>, line: usize, name: &'static str) -> Result<u64, RxpkError> {
    field(obj, line, name)?.as_u64().ok_or_else(|| invalid(line, name, "expected an unsigned integer"))
}

fn int(obj: &Map<String, Value>, line: usize, name: &'static str) -> Result<i64, RxpkError> {
    field(obj, line, name)?.as_i64().ok_or_else(|| invalid(line, name, "expected an integer"))
}

fn number(obj: &Map<String, Value>, line: usize, name: &'static str) -> Result<f64, RxpkError> {
    field(obj, line, name)?.as_f64().ok_or_else(|| invalid(line, name, "expected a number"))
}

fn string<'a>(obj: &'a Map<String, Value>, line: usize, name: &'static str) -> Result<&'a str, RxpkError> {
    field(obj, line, name)?.as_str().ok_or_else(|| invalid(line, name, "expected a string"))
}

fn narrow<T: TryFrom<i64>>(v: i64, line: usize, name: &'static str) -> Result<T, RxpkError> {
    T::try_from(v).map_err(|_| invalid(line, name, format!("{v} is out of range")))
}

/// `"SF12BW125"` → (12, 125 kHz).
fn parse_datr(s: &str) -> Option<(u8, Bandwidth)> {
    let rest = s.strip_prefix("SF")?;
    let (sf, bw) = rest.split_once("BW")?;
    let sf: u8 = sf.parse().ok()?;
    check_spreading_factor(sf).ok()?;
    let khz: u32 = bw.parse().ok()?;
    let bw = Bandwidth::try_from(khz.checked_mul(1000)?).ok()?;
    Some((sf, bw))
}

/// `"4/7"` → 3.
fn parse_codr(s: &str) -> Option<u8> {
    let den: u8 = s.strip_prefix("4/")?.parse().ok()?;
    (5..=8).contains(&den).then(|| den - 4)
}

fn parse_packet(obj: &Map<String, Value>, line: usize) -> Result<RxPk, RxpkError> {
    let tmst = uint(obj, line, "tmst")?;
    let tmst = u32::try_from(tmst).map_err(|_| invalid(line, "tmst", "exceeds 32 bits"))?;
    let chan = narrow(int(obj, line, "chan")?, line, "chan")?;
    let rfch = narrow(int(obj, line, "rfch")?, line, "rfch")?;
    let freq = number(obj, line, "freq")?;
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(invalid(line, "freq", "must be a positive frequency in MHz"));
    }
    let stat = narrow(int(obj, line, "stat")?, line, "stat")?;
    let modu = string(obj, line, "modu")?;
    if modu != "LORA" {
        return Err(invalid(line, "modu", format!("unsupported modulation {modu:?}")));
    }
    let datr = string(obj, line, "datr")?;
    let (spreading_factor, bandwidth) =
        parse_datr(datr).ok_or_else(|| invalid(line, "datr", format!("{datr:?} is not SF<n>BW<khz>")))?;
    let codr = string(obj, line, "codr")?;
    let coding_rate = parse_codr(codr).ok_or_else(|| invalid(line, "codr", format!("{codr:?} is not 4/5..4/8")))?;
    let lsnr_db = number(obj, line, "lsnr")?;
    let rssi_dbm = narrow(int(obj, line, "rssi")?, line, "rssi")?;
    let size = uint(obj, line, "size")?;
    let data = STANDARD
        .decode(string(obj, line, "data")?)
        .map_err(|e| RxpkError::Base64 { line, message: e.to_string() })?;
    if data.len() as u64 != size {
        return Err(invalid(line, "size", format!("{size} but data holds {} bytes", data.len())));
    }
    Ok(RxPk {
        tmst,
        chan,
        rfch,
        freq_hz: (freq * 1e6).round() as u64,
        stat,
        spreading_factor,
        bandwidth,
        coding_rate,
        lsnr_db,
        rssi_dbm,
        data,
    })
}
