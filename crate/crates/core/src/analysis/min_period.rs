use std::collections::BTreeMap;

use serde::Serialize;

use super::AnalysisError;
use crate::engine::{run, MacPlan, Scenario, Traffic, ValidationPolicy, DEFAULT_BUS_OVERHEAD_MS, DEFAULT_PAYLOAD_LEN};
use crate::mac::{DeadlinePolicy, Outcome};
use crate::node::{ClockModel, RadioSpec, Topology};
use crate::phy::RadioConfig;

/// How each probe of the empirical search is set up.
///
/// A probe runs `radios` radios on one bus, all released together at every
/// multiple of the candidate period, under ideal clocks, for `cycles`
/// periods. It passes when no frame misses its implicit deadline and no
/// radio's release error drifts by more than `drift_tolerance_ms` over the
/// run, so delays do not accumulate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinPeriodSearch {
    pub radio: RadioConfig,
    pub payload_len: usize,
    pub bus_overhead_ms: f64,
    pub cycles: u64,
    pub drift_tolerance_ms: f64,
}

impl Default for MinPeriodSearch {
    fn default() -> Self {
        MinPeriodSearch {
            radio: RadioConfig::default(),
            payload_len: DEFAULT_PAYLOAD_LEN,
            bus_overhead_ms: DEFAULT_BUS_OVERHEAD_MS,
            cycles: 200,
            drift_tolerance_ms: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinPeriodResult {
    pub period_ms: u64,
    /// Every probe run, as `(period_ms, passed)`, in search order.
    pub probes: Vec<(u64, bool)>,
}

impl MinPeriodSearch {
    fn scenario(&self, sf: u8, radios: usize, period_ms: u64) -> Scenario {
        let specs = (0..radios as u32)
            .map(|node_id| RadioSpec { node_id, config: self.radio.with_spreading_factor(sf) })
            .collect();
        let mut topology = Topology::single_master(specs);
        topology.masters[0].clock = ClockModel::ideal();
        topology.link_model.shadowing_sigma_db = 0.0;
        let traffic = Traffic::Periodic { period_ms, phases_ms: Some(vec![0; radios]) };
        let mut s = Scenario::new(topology, MacPlan::Tdma { traffic }, period_ms * self.cycles);
        s.payload_len = self.payload_len;
        s.bus_overhead_ms = self.bus_overhead_ms;
        s.validation = ValidationPolicy::Off;
        s.deadline = DeadlinePolicy::Implicit;
        s
    }

    /// Runs one probe; true iff `period_ms` is sustainable.
    pub fn probe(&self, sf: u8, radios: usize, period_ms: u64) -> Result<bool, AnalysisError> {
        if period_ms == 0 {
            return Ok(false);
        }
        let trace = run(&self.scenario(sf, radios, period_ms), 0)?;
        if trace.attempts.iter().any(|a| a.outcome == Outcome::DeadlineMissed) {
            return Ok(false);
        }
        let mut range: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        for a in &trace.attempts {
            let e = a.release_error_ms();
            let r = range.entry(a.node_id).or_insert((e, e));
            r.0 = r.0.min(e);
            r.1 = r.1.max(e);
        }
        Ok(range.values().all(|(lo, hi)| hi - lo <= self.drift_tolerance_ms))
    }
}

/// Smallest integer period (ms) in `(lo, hi]` that a probe accepts, found by
/// bisection. `lo` must fail and `hi` must pass.
pub fn find_min_period_empirical(
    search: &MinPeriodSearch,
    sf: u8,
    radios: usize,
    bounds_ms: (u64, u64),
) -> Result<MinPeriodResult, AnalysisError> {
    let (mut lo, mut hi) = bounds_ms;
    if radios == 0 {
        return Err(AnalysisError::ZeroRadios);
    }
    if lo >= hi {
        return Err(AnalysisError::InvalidBracket { lo, hi, reason: "lower bound is not below upper bound" });
    }
    let mut probes = Vec::new();
    let mut probe = |p: u64| -> Result<bool, AnalysisError> {
        let ok = search.probe(sf, radios, p)?;
        probes.push((p, ok));
        Ok(ok)
    };
    if probe(lo)? {
        return Err(AnalysisError::InvalidBracket { lo, hi, reason: "lower bound already passes" });
    }
    if !probe(hi)? {
        return Err(AnalysisError::InvalidBracket { lo, hi, reason: "upper bound fails" });
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MinPeriodResult { period_ms: hi, probes })
}
