//! Drifting local clocks corrected by periodic time synchronization.
//!
//! Between corrections a master's local clock runs at rate `1 + drift_ppm·1e-6`
//! relative to global time. Each correction snaps the local clock back to
//! global time up to a residual drawn uniformly from
//! `[-sync_error_bound_ms, sync_error_bound_ms]`. So at any global instant `g`
//! after the last correction at `g_s` with residual `r`:
//!
//! ```text
//! local(g) = g + r + drift·(g - g_s)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockModel {
    pub drift_ppm: f64,
    pub initial_offset_ms: f64,
    pub sync_period_s: f64,
    pub sync_error_bound_ms: f64,
    pub sync_enabled: bool,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            drift_ppm: 20.0,
            initial_offset_ms: 0.0,
            sync_period_s: 64.0,
            sync_error_bound_ms: 1.0,
            sync_enabled: true,
        }
    }
}

impl ClockModel {
    /// A perfect clock.
    pub fn ideal() -> Self {
        ClockModel { drift_ppm: 0.0, initial_offset_ms: 0.0, sync_error_bound_ms: 0.0, ..ClockModel::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.drift_ppm.abs() <= 1000.0) {
            return Err(format!("|drift_ppm| = {} exceeds 1000", self.drift_ppm));
        }
        if !(self.sync_period_s > 0.0) {
            return Err("sync_period_s must be positive".into());
        }
        if !(self.sync_error_bound_ms >= 0.0) {
            return Err("sync_error_bound_ms must be non-negative".into());
        }
        if !self.initial_offset_ms.is_finite() {
            return Err("initial_offset_ms must be finite".into());
        }
        Ok(())
    }

    fn rate(&self) -> f64 {
        1.0 + self.drift_ppm * 1e-6
    }

    /// Worst-case |local - global| once the first correction has happened.
    pub fn error_bound_ms(&self) -> f64 {
        self.sync_error_bound_ms + self.drift_ppm.abs() * 1e-6 * self.sync_period_s * 1_000.0
    }
}

/// Global time at which a clock reads `local_ms`, given the last correction
/// happened at `last_sync_global_ms` and left residual `residual_ms`.
pub fn local_to_global(clock: &ClockModel, local_ms: f64, last_sync_global_ms: f64, residual_ms: f64) -> f64 {
    last_sync_global_ms + (local_ms - last_sync_global_ms - residual_ms) / clock.rate()
}

/// The full piecewise-linear history of one clock over a run. Corrections
/// happen at every multiple of the sync period up to the horizon; the
/// residuals are drawn once, up front, so the trajectory is a pure value.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockTrajectory {
    model: ClockModel,
    /// `(correction instant, residual ms)`, sorted; the first entry is boot.
    segments: Vec<(SimTime, f64)>,
}

impl ClockTrajectory {
    pub fn build<R: Rng>(model: ClockModel, horizon: SimTime, rng: &mut R) -> Self {
        let mut segments = vec![(SimTime::ZERO, model.initial_offset_ms)];
        if model.sync_enabled {
            let period = SimTime::from_ms_f64(model.sync_period_s * 1_000.0);
            let bound = model.sync_error_bound_ms;
            let mut at = period;
            while period > SimTime::ZERO && at <= horizon {
                let residual = if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
                segments.push((at, residual));
                at = at + period;
            }
        }
        ClockTrajectory { model, segments }
    }

    pub fn model(&self) -> &ClockModel {
        &self.model
    }

    /// Correction instants, excluding boot.
    pub fn sync_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.segments.iter().skip(1).map(|s| s.0)
    }

    fn segment_at(&self, global: SimTime) -> usize {
        self.segments.partition_point(|s| s.0 <= global).saturating_sub(1)
    }

    fn local_in_segment_us(&self, seg: usize, global_us: f64) -> f64 {
        let (start, residual) = self.segments[seg];
        let start_us = start.as_us() as f64;
        start_us + residual * 1_000.0 + (global_us - start_us) * self.model.rate()
    }

    /// Local clock reading, in ms, at a global instant.
    pub fn local_ms_at(&self, global: SimTime) -> f64 {
        self.local_in_segment_us(self.segment_at(global), global.as_us() as f64) / 1_000.0
    }

    /// `local - global` in ms.
    pub fn error_ms_at(&self, global: SimTime) -> f64 {
        let seg = self.segment_at(global);
        let (start, residual) = self.segments[seg];
        residual + (global.as_us() - start.as_us()) as f64 * self.model.drift_ppm * 1e-9
    }

    /// Earliest global microsecond at which the local clock reads at least
    /// `local_ms`.
    pub fn global_for_local(&self, local_ms: f64) -> SimTime {
        let target_us = local_ms * 1_000.0;
        for seg in 0..self.segments.len() {
            let start = self.segments[seg].0;
            let end = self.segments.get(seg + 1).map(|s| s.0);
            if self.local_in_segment_us(seg, start.as_us() as f64) >= target_us {
                return start;
            }
            let (s_us, residual) = (start.as_us() as f64, self.segments[seg].1);
            let exact = s_us + (target_us - s_us - residual * 1_000.0) / self.model.rate();
            let mut g = exact.ceil().max(s_us) as u64;
            while self.local_in_segment_us(seg, g as f64) < target_us {
                g += 1;
            }
            while g > start.as_us() && self.local_in_segment_us(seg, (g - 1) as f64) >= target_us {
                g -= 1;
            }
            if end.is_none_or(|e| g < e.as_us()) {
                return SimTime::from_us(g);
            }
        }
        unreachable!("the last segment is unbounded")
    }
}
