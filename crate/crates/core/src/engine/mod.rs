//! Deterministic discrete-event kernel.
//!
//! A run is a pure function of `(Scenario, seed)`. Time advances in whole
//! microseconds. Each transmission walks through
//! `Release → BusGrant → [CsmaSense…] → TxStart → TxEnd → GatewayDeliver`,
//! and the bus stays held from the grant until the setup overhead has
//! elapsed after the frame leaves the air.

mod queue;
mod scenario;
mod trace;

pub use queue::{EventKind, EventQueue, SimEvent};
pub use scenario::{
    BusyWindow, MacPlan, Scenario, Traffic, ValidationPolicy, DEFAULT_BUS_OVERHEAD_MS, DEFAULT_PAYLOAD_LEN,
};
pub use trace::{ClockSample, NodeEnergy, Reception, RunTrace, TraceError};

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::mac::{
    deadline_check, AttemptRecord, CsmaParams, CsmaProcess, CsmaStep, LossCause, MacError, Outcome,
};
use crate::node::{BusError, BusGrant, BusState, ClockTrajectory, TopologyError};
use crate::phy::{
    self, arbitrate_collisions, decodable, link_budget, FrameFate, FrameOnAir, LinkBudget, LinkModel, PhyError, RadioConfig,
};
use crate::rng::{substream, Substream};
use crate::schedule::{power_budget, Conflict, ScheduleError};
use crate::time::SimTime;

const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("schedule is infeasible: {count} conflict(s), first {first:?}")]
    Infeasible { count: usize, first: Conflict },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invariant violated at {at}: {what}")]
    InvariantViolated { at: SimTime, what: String },
}

impl From<BusError> for EngineError {
    fn from(e: BusError) -> Self {
        EngineError::InvariantViolated { at: SimTime::ZERO, what: e.to_string() }
    }
}

/// Validates `scenario` and runs it to completion under `seed`.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunTrace, EngineError> {
    let schedule = scenario.resolve_schedule(seed)?;
    scenario.validate(&schedule)?;
    let mut sim = Sim::new(scenario, seed, &schedule)?;
    sim.run()?;
    Ok(sim.finish(scenario.digest(), schedule.period_ms()))
}

/// Text each frame carries: `"Packet {k} from Radio {node + 1}"`, padded
/// with spaces or cut to `len` bytes.
pub fn payload_for(node_id: u32, packet_index: u64, len: usize) -> Vec<u8> {
    let mut bytes = format!("Packet {packet_index} from Radio {}", node_id + 1).into_bytes();
    bytes.resize(len, b' ');
    bytes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GatewayVerdict {
    Received(LinkBudget),
    Collided,
    BelowFloor,
}

/// Gateway decision for a frame that has finished arriving: it must survive
/// contention and clear the demodulation floor of its SF.
pub fn gateway_receive(fate: FrameFate, budget: LinkBudget, link: &LinkModel, sf: u8) -> Result<GatewayVerdict, PhyError> {
    Ok(match fate {
        FrameFate::Collided => GatewayVerdict::Collided,
        FrameFate::Survives if decodable(link, budget.snr_db, sf)? => GatewayVerdict::Received(budget),
        FrameFate::Survives => GatewayVerdict::BelowFloor,
    })
}

fn shadow_draw<R: Rng>(link: &LinkModel, rng: &mut R) -> f64 {
    if link.shadowing_sigma_db > 0.0 {
        Normal::new(0.0, link.shadowing_sigma_db).expect("validated sigma").sample(rng)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeStatus {
    Idle,
    WaitingBus,
    Holding,
}

struct NodeState {
    master: usize,
    config: RadioConfig,
    pending: VecDeque<u64>,
    status: NodeStatus,
}

struct MasterState {
    master_id: u32,
    bus: BusState,
    clock: ClockTrajectory,
    on_air: usize,
    max_concurrent_tx: u32,
    distance_m: f64,
    propagation: SimTime,
}

/// Per-attempt working state until the attempt is finalized.
struct Active {
    release_global: SimTime,
    csma: Option<CsmaProcess>,
    frame: Option<FrameOnAir>,
    tx_start: Option<SimTime>,
    link: Option<LinkBudget>,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    seed: u64,
    queue: EventQueue,
    now: SimTime,
    nodes: BTreeMap<u32, NodeState>,
    masters: Vec<MasterState>,
    /// Records are created at release and finalized exactly once.
    records: Vec<AttemptRecord>,
    finalized: Vec<bool>,
    active: BTreeMap<u64, Active>,
    /// Frames whose arrival window may still overlap an undelivered frame.
    air: VecDeque<FrameOnAir>,
    /// Transmit-side windows, for carrier sensing.
    tx_windows: VecDeque<(usize, SimTime, SimTime)>,
    max_toa: SimTime,
    max_propagation: SimTime,
    csma: Option<&'a CsmaParams>,
    shadowing: ChaCha8Rng,
    backoff: ChaCha8Rng,
    sensing: ChaCha8Rng,
    receptions: Vec<Reception>,
    clock_samples: Vec<ClockSample>,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario, seed: u64, schedule: &crate::schedule::Schedule) -> Result<Self, EngineError> {
        let topo = &scenario.topology;
        let horizon = SimTime::from_ms(scenario.horizon_ms);
        let mut clock_rng = substream(seed, Substream::Clock);
        let mut masters = Vec::new();
        let mut nodes = BTreeMap::new();
        let mut max_toa = SimTime::ZERO;
        for (mi, m) in topo.masters.iter().enumerate() {
            let power = power_budget(&m.budget, 1).map_err(|source| TopologyError::Budget { master: m.master_id, source })?;
            let distance_m = topo.distance_to_gateway_m(m);
            masters.push(MasterState {
                master_id: m.master_id,
                bus: BusState::new(m.radios.iter().map(|r| r.node_id)),
                clock: ClockTrajectory::build(m.clock, horizon, &mut clock_rng),
                on_air: 0,
                max_concurrent_tx: power.max_concurrent_tx,
                distance_m,
                propagation: SimTime::from_us((distance_m / SPEED_OF_LIGHT_M_PER_S * 1e6).round() as u64),
            });
            for r in &m.radios {
                nodes.insert(
                    r.node_id,
                    NodeState { master: mi, config: r.config, pending: VecDeque::new(), status: NodeStatus::Idle },
                );
            }
        }

        let csma = match &scenario.mac {
            MacPlan::Csma { params, .. } => Some(params),
            MacPlan::Tdma { .. } => None,
        };
        let mac = scenario.mac.kind();

        // Map every in-horizon release onto global time through its master's
        // clock, then number attempts in global release order.
        let mut releases = Vec::new();
        for ev in schedule.events().iter().filter(|e| e.release_time_ms <= scenario.horizon_ms) {
            let node = nodes.get(&ev.node_id).ok_or(ScheduleError::UnknownNode(ev.node_id))?;
            let global = masters[node.master].clock.global_for_local(ev.release_time_ms as f64);
            releases.push((global, ev.node_id, *ev));
        }
        releases.sort_by_key(|&(g, node, ev)| (g, node, ev.release_time_ms));

        let mut records = Vec::with_capacity(releases.len());
        let mut active = BTreeMap::new();
        let mut queue = EventQueue::default();
        let mut packet_counters: BTreeMap<u32, u64> = BTreeMap::new();
        for (id, &(global, node_id, ev)) in releases.iter().enumerate() {
            let node = &nodes[&node_id];
            let cfg = node.config.with_spreading_factor(ev.spreading_factor).with_channel(ev.channel_index);
            let toa = phy::airtime(&cfg, scenario.payload_len)?;
            max_toa = max_toa.max(toa);
            let counter = packet_counters.entry(node_id).or_insert(0);
            let scheduled = SimTime::from_ms(ev.release_time_ms);
            records.push(AttemptRecord {
                attempt_id: id as u64,
                node_id,
                master_id: masters[node.master].master_id,
                mac,
                packet_index: *counter,
                scheduled_release: scheduled,
                actual_start: global,
                toa,
                spreading_factor: ev.spreading_factor,
                channel_index: ev.channel_index,
                backoffs: 0,
                hops: 0,
                transmitted: false,
                arrival: None,
                deadline: scenario.deadline.deadline_for(scheduled, schedule.period_ms()),
                rssi_dbm: None,
                snr_db: None,
                outcome: Outcome::Undeliverable,
                loss_cause: None,
            });
            *counter += 1;
            active.insert(
                id as u64,
                Active { release_global: global, csma: None, frame: None, tx_start: None, link: None },
            );
            queue.push(global, EventKind::Release { attempt: id as u64 });
        }

        for (mi, m) in masters.iter().enumerate() {
            for t in m.clock.sync_times() {
                queue.push(t, EventKind::ClockSync { master: mi });
            }
            if let Some(step) = scenario.clock_sample_ms {
                let mut t = 0;
                while t <= scenario.horizon_ms {
                    queue.push(SimTime::from_ms(t), EventKind::ClockSample { master: mi });
                    t += step;
                }
            }
        }
        queue.push(horizon, EventKind::SimEnd);

        let finalized = vec![false; records.len()];
        let max_propagation = masters.iter().map(|m| m.propagation).max().unwrap_or(SimTime::ZERO);
        Ok(Sim {
            scenario,
            seed,
            queue,
            now: SimTime::ZERO,
            nodes,
            masters,
            records,
            finalized,
            active,
            air: VecDeque::new(),
            tx_windows: VecDeque::new(),
            max_toa,
            max_propagation,
            csma,
            shadowing: substream(seed, Substream::Shadowing),
            backoff: substream(seed, Substream::Backoff),
            sensing: substream(seed, Substream::Sensing),
            receptions: Vec::new(),
            clock_samples: Vec::new(),
        })
    }

    fn violation(&self, what: impl Into<String>) -> EngineError {
        EngineError::InvariantViolated { at: self.now, what: what.into() }
    }

    fn run(&mut self) -> Result<(), EngineError> {
        while let Some(ev) = self.queue.pop() {
            if ev.time < self.now {
                return Err(self.violation(format!("event {:?} scheduled in the past", ev.kind)));
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Release { attempt } => self.on_release(attempt)?,
                EventKind::BusGrant { node } => self.on_grant(node)?,
                EventKind::TxStart { attempt } => {
                    let ch = self.records[attempt as usize].channel_index;
                    self.start_tx(attempt, ch)?
                }
                EventKind::CsmaSense { attempt } => self.on_sense(attempt)?,
                EventKind::TxEnd { attempt } => self.on_tx_end(attempt)?,
                EventKind::BusRelease { node } => self.on_bus_release(node)?,
                EventKind::GatewayDeliver { attempt } => self.on_deliver(attempt)?,
                EventKind::ClockSync { master } => self.sample_clock(master, true)?,
                EventKind::ClockSample { master } => self.sample_clock(master, false)?,
                EventKind::SimEnd => {}
            }
        }
        if let Some(i) = self.finalized.iter().position(|f| !f) {
            return Err(self.violation(format!("attempt {i} never finalized")));
        }
        Ok(())
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) -> Result<(), EngineError> {
        if at < self.now {
            return Err(self.violation(format!("{kind:?} scheduled at {at}, in the past")));
        }
        self.queue.push(at, kind);
        Ok(())
    }

    fn request_bus(&mut self, node_id: u32) -> Result<(), EngineError> {
        let master = self.nodes[&node_id].master;
        let grant = self.masters[master].bus.bus_request(node_id, self.now).map_err(|e| self.violation(e.to_string()))?;
        self.nodes.get_mut(&node_id).expect("known node").status = NodeStatus::WaitingBus;
        if grant == BusGrant::GrantedNow {
            self.schedule(self.now, EventKind::BusGrant { node: node_id })?;
        }
        Ok(())
    }

    fn on_release(&mut self, attempt: u64) -> Result<(), EngineError> {
        let node_id = self.records[attempt as usize].node_id;
        let node = self.nodes.get_mut(&node_id).expect("known node");
        node.pending.push_back(attempt);
        if node.status == NodeStatus::Idle {
            self.request_bus(node_id)?;
        }
        Ok(())
    }

    fn on_grant(&mut self, node_id: u32) -> Result<(), EngineError> {
        let node = self.nodes.get_mut(&node_id).expect("known node");
        let attempt = node.pending.pop_front().ok_or_else(|| EngineError::InvariantViolated {
            at: self.now,
            what: format!("node {node_id} granted the bus with nothing to send"),
        })?;
        node.status = NodeStatus::Holding;
        match self.csma {
            None => self.schedule(self.now, EventKind::TxStart { attempt }),
            Some(params) => {
                let start_channel = self.records[attempt as usize].channel_index;
                self.active.get_mut(&attempt).expect("active attempt").csma = Some(CsmaProcess::new(start_channel));
                self.schedule(self.now + params.sense_duration(), EventKind::CsmaSense { attempt })
            }
        }
    }

    /// True iff `channel` carries a frame or a background window anywhere in
    /// `[from, to]`.
    fn channel_busy(&self, channel: usize, from: SimTime, to: SimTime) -> bool {
        let frames = self.tx_windows.iter().any(|&(ch, s, e)| ch == channel && s <= to && e > from);
        frames || self.background_overlaps(channel, from, to, true)
    }

    fn background_overlaps(&self, channel: usize, from: SimTime, to: SimTime, closed: bool) -> bool {
        self.scenario.background.iter().any(|w| {
            let (s, e) = (SimTime::from_ms_f64(w.start_ms), SimTime::from_ms_f64(w.end_ms));
            w.channel_index == channel && (if closed { s <= to } else { s < to }) && e > from
        })
    }

    fn on_sense(&mut self, attempt: u64) -> Result<(), EngineError> {
        let params = self.csma.expect("CSMA run");
        let mut proc = self.active.get_mut(&attempt).and_then(|a| a.csma.take()).expect("CSMA attempt");
        let from = self.now.saturating_sub(params.sense_duration());
        let busy = self.channel_busy(proc.channel(), from, self.now);
        let sensed = params.sensed_busy(busy, &mut self.sensing);
        let step = proc.on_sensed(params, sensed, &mut self.backoff);
        {
            let rec = &mut self.records[attempt as usize];
            rec.backoffs = proc.backoffs();
            rec.hops = proc.hops();
            rec.channel_index = proc.channel();
        }
        match step {
            CsmaStep::Transmit { channel } => self.start_tx(attempt, channel),
            CsmaStep::Backoff { wait, .. } => {
                self.active.get_mut(&attempt).expect("active attempt").csma = Some(proc);
                self.schedule(self.now + wait + params.sense_duration(), EventKind::CsmaSense { attempt })
            }
            CsmaStep::Exhausted => {
                let node_id = self.records[attempt as usize].node_id;
                let rec = &mut self.records[attempt as usize];
                rec.actual_start = self.now;
                rec.outcome = Outcome::Undeliverable;
                rec.loss_cause = Some(LossCause::ChannelBusy);
                self.finalize(attempt)?;
                self.schedule(self.now, EventKind::BusRelease { node: node_id })
            }
        }
    }

    fn start_tx(&mut self, attempt: u64, channel: usize) -> Result<(), EngineError> {
        let now = self.now;
        let (node_id, sf, toa) = {
            let r = &self.records[attempt as usize];
            (r.node_id, r.spreading_factor, r.toa)
        };
        let node = &self.nodes[&node_id];
        let master = node.master;
        let m = &self.masters[master];
        if m.bus.owner() != Some(node_id) {
            return Err(self.violation(format!("node {node_id} transmits without holding bus {}", m.master_id)));
        }
        if m.on_air >= 1 || (m.on_air as u64) >= u64::from(m.max_concurrent_tx) {
            return Err(self.violation(format!("master {} exceeds its concurrent transmit limit", m.master_id)));
        }
        let act = &self.active[&attempt];
        if now < act.release_global {
            return Err(self.violation(format!("attempt {attempt} transmits before its release")));
        }
        let tx_power = node.config.tx_power_dbm;
        let (distance_m, prop) = (m.distance_m, m.propagation);
        let link = self.scenario.topology.link_model;
        let budget = link_budget(&link, tx_power, distance_m, shadow_draw(&link, &mut self.shadowing));

        let frame = FrameOnAir {
            id: attempt,
            channel_index: channel,
            spreading_factor: sf,
            start: now + prop,
            end: now + toa + prop,
            rssi_dbm: budget.rssi_dbm,
        };
        self.air.push_back(frame);
        self.tx_windows.push_back((channel, now, now + toa));
        self.masters[master].on_air += 1;
        let act = self.active.get_mut(&attempt).expect("active attempt");
        act.frame = Some(frame);
        act.tx_start = Some(now);
        act.link = Some(budget);
        let rec = &mut self.records[attempt as usize];
        rec.actual_start = now;
        rec.channel_index = channel;
        rec.transmitted = true;
        self.schedule(now + toa, EventKind::TxEnd { attempt })
    }

    fn on_tx_end(&mut self, attempt: u64) -> Result<(), EngineError> {
        let node_id = self.records[attempt as usize].node_id;
        let master = self.nodes[&node_id].master;
        self.masters[master].on_air -= 1;
        let prop = self.masters[master].propagation;
        self.schedule(self.now + prop, EventKind::GatewayDeliver { attempt })?;
        let overhead = SimTime::from_ms_f64(self.scenario.bus_overhead_ms);
        self.schedule(self.now + overhead, EventKind::BusRelease { node: node_id })
    }

    fn on_bus_release(&mut self, node_id: u32) -> Result<(), EngineError> {
        let master = self.nodes[&node_id].master;
        let next = self.masters[master].bus.bus_release(node_id, self.now).map_err(|e| self.violation(e.to_string()))?;
        if let Some(next) = next {
            self.schedule(self.now, EventKind::BusGrant { node: next })?;
        }
        let node = self.nodes.get_mut(&node_id).expect("known node");
        node.status = NodeStatus::Idle;
        if !node.pending.is_empty() {
            self.request_bus(node_id)?;
        }
        Ok(())
    }

    fn on_deliver(&mut self, attempt: u64) -> Result<(), EngineError> {
        let act = self.active.get(&attempt).expect("active attempt");
        let frame = act.frame.expect("delivered frame was transmitted");
        let link = act.link.expect("delivered frame has a link budget");
        let rivals: Vec<FrameOnAir> = self
            .air
            .iter()
            .filter(|g| g.id == attempt || (g.start < frame.end && frame.start < g.end))
            .copied()
            .collect();
        let model = &self.scenario.topology.link_model;
        let fate = arbitrate_collisions(&rivals, model.capture_threshold_db)[&attempt];
        let tx_start = act.tx_start.expect("transmitted");
        let tx_end = tx_start + self.records[attempt as usize].toa;
        let background = self.background_overlaps(frame.channel_index, tx_start, tx_end, false);

        let (outcome, cause) = match gateway_receive(fate, link, model, frame.spreading_factor)? {
            _ if background => (Outcome::Collided, Some(LossCause::Background)),
            GatewayVerdict::Collided => (Outcome::Collided, Some(LossCause::Collision)),
            GatewayVerdict::BelowFloor => (Outcome::Undeliverable, Some(LossCause::BelowFloor)),
            GatewayVerdict::Received(_) => (Outcome::Received, None),
        };

        let node_id = self.records[attempt as usize].node_id;
        let cfg = self.nodes[&node_id].config;
        let rec = &mut self.records[attempt as usize];
        rec.outcome = outcome;
        rec.loss_cause = cause;
        if outcome == Outcome::Received {
            rec.arrival = Some(self.now);
            rec.rssi_dbm = Some(link.rssi_dbm);
            let reported = model.reported_snr_db(link.snr_db, frame.spreading_factor);
            rec.snr_db = Some(reported);
            if let Some(deadline) = rec.deadline {
                rec.outcome = deadline_check(rec, deadline);
                if rec.outcome == Outcome::DeadlineMissed {
                    rec.loss_cause = Some(LossCause::Late);
                }
            }
            self.receptions.push(Reception {
                attempt_id: attempt,
                node_id,
                arrival: self.now,
                rssi_dbm: link.rssi_dbm,
                snr_db: reported,
                spreading_factor: frame.spreading_factor,
                bandwidth: cfg.bandwidth,
                coding_rate: cfg.coding_rate,
                channel_index: frame.channel_index,
                frequency_hz: self.scenario.topology.channel_table.frequency_hz(frame.channel_index)?,
                payload: payload_for(node_id, rec.packet_index, self.scenario.payload_len),
            });
        }
        self.finalize(attempt)?;
        self.prune_air();
        Ok(())
    }

    fn finalize(&mut self, attempt: u64) -> Result<(), EngineError> {
        let i = attempt as usize;
        if std::mem::replace(&mut self.finalized[i], true) {
            return Err(self.violation(format!("attempt {attempt} finalized twice")));
        }
        let rec = &self.records[i];
        if rec.actual_start < self.active[&attempt].release_global {
            return Err(self.violation(format!("attempt {attempt} starts before its release")));
        }
        self.active.remove(&attempt);
        Ok(())
    }

    /// Drops frames that can no longer overlap anything still undelivered:
    /// a frame delivered at or after `now` started no earlier than
    /// `now - max_toa - propagation`.
    fn prune_air(&mut self) {
        let cutoff = self.now.saturating_sub(self.max_toa + self.max_propagation);
        while self.air.front().is_some_and(|f| f.end < cutoff) {
            self.air.pop_front();
        }
        while self.tx_windows.front().is_some_and(|w| w.2 < cutoff) {
            self.tx_windows.pop_front();
        }
    }

    fn sample_clock(&mut self, master: usize, at_sync: bool) -> Result<(), EngineError> {
        let m = &self.masters[master];
        let error_ms = m.clock.error_ms_at(self.now);
        let model = m.clock.model();
        if model.sync_enabled {
            let since_boot = model.initial_offset_ms.abs() + model.drift_ppm.abs() * 1e-6 * model.sync_period_s * 1e3;
            let bound = model.error_bound_ms().max(since_boot);
            if error_ms.abs() > bound + 1e-9 {
                return Err(self.violation(format!(
                    "master {} clock error {error_ms} ms exceeds bound {bound} ms",
                    m.master_id
                )));
            }
        }
        self.clock_samples.push(ClockSample { master_id: m.master_id, at: self.now, error_ms, at_sync });
        Ok(())
    }

    fn finish(self, digest: String, period_ms: Option<u64>) -> RunTrace {
        let mut energy: BTreeMap<u32, NodeEnergy> = self
            .nodes
            .keys()
            .map(|&node_id| {
                (node_id, NodeEnergy { node_id, attempts: 0, transmissions: 0, tx_time: SimTime::ZERO, backoffs: 0, hops: 0 })
            })
            .collect();
        for r in &self.records {
            let e = energy.get_mut(&r.node_id).expect("known node");
            e.attempts += 1;
            e.backoffs += u64::from(r.backoffs);
            e.hops += u64::from(r.hops);
            if r.transmitted {
                e.transmissions += 1;
                e.tx_time = e.tx_time + r.toa;
            }
        }
        RunTrace {
            seed: self.seed,
            digest,
            mac: self.scenario.mac.kind(),
            horizon: SimTime::from_ms(self.scenario.horizon_ms),
            period_ms,
            attempts: self.records,
            receptions: self.receptions,
            energy: energy.into_values().collect(),
            clock_samples: self.clock_samples,
        }
    }
}

#[cfg(test)]
mod tests;
