use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MacError;
use crate::phy::ChannelTable;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsmaParams {
    pub sense_duration_ms: f64,
    /// `[min, max]` of the uniform backoff draw.
    pub backoff_window_ms: [f64; 2],
    pub max_hops: u32,
    pub hop_order: Vec<usize>,
    pub backoff_energy_mj: f64,
    /// Chance that a busy channel is sensed as idle.
    pub sensing_failure_prob: f64,
}

impl Default for CsmaParams {
    fn default() -> Self {
        CsmaParams {
            sense_duration_ms: 2.0,
            backoff_window_ms: [10.0, 50.0],
            max_hops: 7,
            hop_order: (0..8).collect(),
            backoff_energy_mj: 0.356,
            sensing_failure_prob: 0.0,
        }
    }
}

impl CsmaParams {
    pub fn validate(&self, channels: Option<&ChannelTable>) -> Result<(), MacError> {
        if self.hop_order.is_empty() {
            return Err(MacError::EmptyHopOrder);
        }
        let mut seen = BTreeSet::new();
        for &ch in &self.hop_order {
            if !seen.insert(ch) {
                return Err(MacError::DuplicateHop(ch));
            }
            if let Some(table) = channels {
                if ch >= table.len() {
                    return Err(MacError::HopOutOfRange { index: ch, len: table.len() });
                }
            }
        }
        let [min_ms, max_ms] = self.backoff_window_ms;
        if !(min_ms >= 0.0 && min_ms <= max_ms && max_ms.is_finite()) {
            return Err(MacError::InvalidBackoffWindow { min_ms, max_ms });
        }
        if !(self.sense_duration_ms >= 0.0 && self.sense_duration_ms.is_finite()) {
            return Err(MacError::InvalidSenseDuration);
        }
        if !(self.backoff_energy_mj >= 0.0) {
            return Err(MacError::NegativeBackoffEnergy);
        }
        if !(0.0..=1.0).contains(&self.sensing_failure_prob) {
            return Err(MacError::InvalidSensingFailure(self.sensing_failure_prob));
        }
        Ok(())
    }

    pub fn sense_duration(&self) -> SimTime {
        SimTime::from_ms_f64(self.sense_duration_ms)
    }

    /// Channel tried after `current`: the next entry of the hop order,
    /// wrapping around. A channel outside the order hops to its first entry.
    pub fn next_channel(&self, current: usize) -> usize {
        match self.hop_order.iter().position(|&c| c == current) {
            Some(i) => self.hop_order[(i + 1) % self.hop_order.len()],
            None => self.hop_order[0],
        }
    }

    /// Uniform backoff, drawn at microsecond resolution.
    pub fn draw_backoff<R: Rng>(&self, rng: &mut R) -> SimTime {
        let lo = SimTime::from_ms_f64(self.backoff_window_ms[0]).as_us();
        let hi = SimTime::from_ms_f64(self.backoff_window_ms[1]).as_us();
        SimTime::from_us(rng.random_range(lo..=hi))
    }

    /// What the radio concludes from sensing a channel whose true state is
    /// `busy`.
    pub fn sensed_busy<R: Rng>(&self, busy: bool, rng: &mut R) -> bool {
        busy && !(self.sensing_failure_prob > 0.0 && rng.random_bool(self.sensing_failure_prob))
    }
}

/// What to do after a sense window closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsmaStep {
    /// The channel is idle: transmit on it now.
    Transmit { channel: usize },
    /// Busy: wait `wait`, then sense `channel`.
    Backoff { wait: SimTime, channel: usize },
    /// Busy and no hops left.
    Exhausted,
}

/// Per-attempt CSMA state, advanced once per completed sense window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsmaProcess {
    channel: usize,
    backoffs: u32,
    hops: u32,
    done: bool,
}

impl CsmaProcess {
    pub fn new(start_channel: usize) -> Self {
        CsmaProcess { channel: start_channel, backoffs: 0, hops: 0, done: false }
    }

    pub fn channel(&self) -> usize {
        self.channel
    }

    pub fn backoffs(&self) -> u32 {
        self.backoffs
    }

    pub fn hops(&self) -> u32 {
        self.hops
    }

    /// Feeds the result of sensing the current channel. `backoff_rng` is only
    /// drawn from when the channel is busy and a hop remains.
    pub fn on_sensed<R: Rng>(&mut self, params: &CsmaParams, busy: bool, backoff_rng: &mut R) -> CsmaStep {
        assert!(!self.done, "CSMA attempt already finished");
        if !busy {
            self.done = true;
            return CsmaStep::Transmit { channel: self.channel };
        }
        if self.hops >= params.max_hops {
            self.done = true;
            return CsmaStep::Exhausted;
        }
        self.backoffs += 1;
        self.hops += 1;
        self.channel = params.next_channel(self.channel);
        CsmaStep::Backoff { wait: params.draw_backoff(backoff_rng), channel: self.channel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsmaDecision {
    pub channel: usize,
    pub backoffs: u32,
    pub hops: u32,
    /// Air start, or `None` when every attempt found the channel busy.
    pub tx_start: Option<SimTime>,
    /// When the procedure ended (equal to `tx_start` on success).
    pub finished_at: SimTime,
}

/// Runs a whole CSMA attempt against a channel view that is fully known in
/// advance. `busy(channel, from, to)` reports whether the channel is occupied
/// anywhere in `[from, to]`. The attempt starts sensing at `now`, the instant
/// the node holds the bus.
pub fn csma_attempt<R: Rng>(
    params: &CsmaParams,
    start_channel: usize,
    now: SimTime,
    busy: impl Fn(usize, SimTime, SimTime) -> bool,
    rng: &mut R,
) -> Result<CsmaDecision, MacError> {
    if params.hop_order.is_empty() {
        return Err(MacError::EmptyHopOrder);
    }
    let mut proc = CsmaProcess::new(start_channel);
    let mut t = now;
    loop {
        let sense_end = t + params.sense_duration();
        let sensed = params.sensed_busy(busy(proc.channel(), t, sense_end), rng);
        match proc.on_sensed(params, sensed, rng) {
            CsmaStep::Transmit { channel } => {
                return Ok(CsmaDecision {
                    channel,
                    backoffs: proc.backoffs(),
                    hops: proc.hops(),
                    tx_start: Some(sense_end),
                    finished_at: sense_end,
                })
            }
            CsmaStep::Backoff { wait, .. } => t = sense_end + wait,
            CsmaStep::Exhausted => {
                return Ok(CsmaDecision {
                    channel: proc.channel(),
                    backoffs: proc.backoffs(),
                    hops: proc.hops(),
                    tx_start: None,
                    finished_at: sense_end,
                })
            }
        }
    }
}
