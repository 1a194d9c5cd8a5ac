use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::{AttemptRecord, MacKind};
use crate::phy::Bandwidth;
use crate::time::SimTime;

/// A frame the gateway decoded (possibly after its deadline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reception {
    pub attempt_id: u64,
    pub node_id: u32,
    pub arrival: SimTime,
    pub rssi_dbm: f64,
    /// SNR as the gateway reports it.
    pub snr_db: f64,
    pub spreading_factor: u8,
    #[serde(rename = "bandwidth_hz")]
    pub bandwidth: Bandwidth,
    pub coding_rate: u8,
    pub channel_index: usize,
    pub frequency_hz: u64,
    #[serde(with = "payload_b64")]
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSample {
    pub master_id: u32,
    pub at: SimTime,
    pub error_ms: f64,
    /// Taken at a correction instant, right after the correction.
    pub at_sync: bool,
}

/// Per-node activity totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub node_id: u32,
    pub attempts: u64,
    pub transmissions: u64,
    pub tx_time: SimTime,
    pub backoffs: u64,
    pub hops: u64,
}

/// The complete, immutable result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub digest: String,
    pub mac: MacKind,
    pub horizon: SimTime,
    pub period_ms: Option<u64>,
    pub attempts: Vec<AttemptRecord>,
    pub receptions: Vec<Reception>,
    pub energy: Vec<NodeEnergy>,
    pub clock_samples: Vec<ClockSample>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace has no run header")]
    MissingHeader,
    #[error("line {0}: second run header")]
    DuplicateHeader(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Run { seed: u64, digest: String, mac: MacKind, horizon_ms: SimTime, period_ms: Option<u64> },
    Attempt(AttemptRecord),
    Reception(Reception),
    NodeEnergy(NodeEnergy),
    ClockSample(ClockSample),
}

impl RunTrace {
    /// JSON-lines export: a run header, then attempts, receptions, per-node
    /// totals and clock samples, each in trace order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: TraceLine| {
            out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            out.push('\n');
        };
        push(TraceLine::Run {
            seed: self.seed,
            digest: self.digest.clone(),
            mac: self.mac,
            horizon_ms: self.horizon,
            period_ms: self.period_ms,
        });
        self.attempts.iter().cloned().for_each(|a| push(TraceLine::Attempt(a)));
        self.receptions.iter().cloned().for_each(|r| push(TraceLine::Reception(r)));
        self.energy.iter().copied().for_each(|e| push(TraceLine::NodeEnergy(e)));
        self.clock_samples.iter().copied().for_each(|c| push(TraceLine::ClockSample(c)));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut trace: Option<RunTrace> = None;
        let mut body = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: TraceLine =
                serde_json::from_str(raw).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match line {
                TraceLine::Run { seed, digest, mac, horizon_ms, period_ms } => {
                    if trace.is_some() {
                        return Err(TraceError::DuplicateHeader(i + 1));
                    }
                    trace = Some(RunTrace {
                        seed,
                        digest,
                        mac,
                        horizon: horizon_ms,
                        period_ms,
                        attempts: Vec::new(),
                        receptions: Vec::new(),
                        energy: Vec::new(),
                        clock_samples: Vec::new(),
                    });
                }
                other => body.push(other),
            }
        }
        let mut trace = trace.ok_or(TraceError::MissingHeader)?;
        for line in body {
            match line {
                TraceLine::Attempt(a) => trace.attempts.push(a),
                TraceLine::Reception(r) => trace.receptions.push(r),
                TraceLine::NodeEnergy(e) => trace.energy.push(e),
                TraceLine::ClockSample(c) => trace.clock_samples.push(c),
                TraceLine::Run { .. } => unreachable!(),
            }
        }
        Ok(trace)
    }
}

mod payload_b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}
