//! Medium access: the records every transmission attempt produces, the CSMA
//! sense/backoff/hop state machine, and deadline bookkeeping.
//!
//! TDMA needs no state machine of its own here. A scheduled release waits for
//! the node's bus and transmits the instant it gets it; the engine drives
//! that directly.

mod csma;

pub use csma::{csma_attempt, CsmaDecision, CsmaParams, CsmaProcess, CsmaStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MacError {
    #[error("hop order is empty")]
    EmptyHopOrder,
    #[error("hop order lists channel {0} more than once")]
    DuplicateHop(usize),
    #[error("hop order references channel {index} but only {len} channels exist")]
    HopOutOfRange { index: usize, len: usize },
    #[error("backoff window [{min_ms}, {max_ms}] ms is invalid")]
    InvalidBackoffWindow { min_ms: f64, max_ms: f64 },
    #[error("sense duration must be non-negative")]
    InvalidSenseDuration,
    #[error("backoff energy must be non-negative")]
    NegativeBackoffEnergy,
    #[error("sensing failure probability {0} is outside [0, 1]")]
    InvalidSensingFailure(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacKind {
    Tdma,
    Csma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Received,
    Collided,
    DeadlineMissed,
    Undeliverable,
}

/// Why an attempt did not end up as an on-time reception.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    /// Overlapped another frame on the same channel and SF.
    Collision,
    /// Overlapped a foreign occupancy window on its channel.
    Background,
    /// Reached the gateway below the demodulation floor of its SF.
    BelowFloor,
    /// CSMA found every channel it tried busy.
    ChannelBusy,
    /// Arrived intact but after its deadline.
    Late,
}

/// Everything known about one transmission attempt once it is finalized.
///
/// Times are global simulated time except `scheduled_release`, which is the
/// release instant as written in the schedule (the node's local clock).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_id: u64,
    pub node_id: u32,
    pub master_id: u32,
    pub mac: MacKind,
    /// Per-node sequence number; the payload text carries it.
    pub packet_index: u64,
    pub scheduled_release: SimTime,
    /// Air start, or the instant CSMA gave up.
    pub actual_start: SimTime,
    pub toa: SimTime,
    pub spreading_factor: u8,
    pub channel_index: usize,
    pub backoffs: u32,
    pub hops: u32,
    /// Whether the frame went on air at all.
    pub transmitted: bool,
    pub arrival: Option<SimTime>,
    pub deadline: Option<SimTime>,
    pub rssi_dbm: Option<f64>,
    pub snr_db: Option<f64>,
    pub outcome: Outcome,
    pub loss_cause: Option<LossCause>,
}

impl AttemptRecord {
    /// `actual_start - scheduled_release`, signed, in ms.
    pub fn release_error_ms(&self) -> f64 {
        self.actual_start.signed_ms_since(self.scheduled_release)
    }

    /// Gateway arrival minus air start.
    pub fn latency_ms(&self) -> Option<f64> {
        self.arrival.map(|a| a.signed_ms_since(self.actual_start))
    }

    /// Gateway arrival minus scheduled release.
    pub fn response_ms(&self) -> Option<f64> {
        self.arrival.map(|a| a.signed_ms_since(self.scheduled_release))
    }

    /// Whether the gateway decoded the frame, on time or not.
    pub fn delivered(&self) -> bool {
        matches!(self.outcome, Outcome::Received | Outcome::DeadlineMissed)
    }
}

/// How deadlines are assigned to releases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeadlinePolicy {
    /// Release plus the schedule period; no deadline for aperiodic traffic.
    #[default]
    Implicit,
    /// Release plus a fixed budget.
    Relative { ms: f64 },
    None,
}

impl DeadlinePolicy {
    pub fn deadline_for(&self, release: SimTime, period_ms: Option<u64>) -> Option<SimTime> {
        match *self {
            DeadlinePolicy::Implicit => period_ms.map(|p| release + SimTime::from_ms(p)),
            DeadlinePolicy::Relative { ms } => Some(release + SimTime::from_ms_f64(ms)),
            DeadlinePolicy::None => None,
        }
    }
}

/// Re-marks a received frame as late when it reached the gateway strictly
/// after `deadline`. Any other outcome passes through unchanged.
pub fn deadline_check(rec: &AttemptRecord, deadline: SimTime) -> Outcome {
    match (rec.outcome, rec.arrival) {
        (Outcome::Received, Some(arrival)) if arrival > deadline => Outcome::DeadlineMissed,
        (o, _) => o,
    }
}
