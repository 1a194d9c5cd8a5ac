use proptest::prelude::*;

use super::*;
use crate::mac::DeadlinePolicy;
use crate::node::{ClockModel, MasterSpec, RadioSpec, Topology, DEFAULT_GATEWAY_POSITION_M};
use crate::phy::ChannelTable;
use crate::schedule::{generate_periodic, CapacityBudget, Schedule};

fn radio(node_id: u32, sf: u8, ch: usize) -> RadioSpec {
    RadioSpec { node_id, config: RadioConfig::default().with_spreading_factor(sf).with_channel(ch) }
}

fn master(master_id: u32, radios: Vec<RadioSpec>) -> MasterSpec {
    MasterSpec {
        master_id,
        radios,
        position_m: [0.0, 0.0],
        clock: ClockModel::ideal(),
        budget: CapacityBudget::default(),
    }
}

fn topology(masters: Vec<MasterSpec>) -> Topology {
    Topology {
        masters,
        gateway_position_m: DEFAULT_GATEWAY_POSITION_M,
        channel_table: ChannelTable::default(),
        link_model: LinkModel::default(),
    }
}

fn tdma(topo: Topology, schedule: Schedule) -> Scenario {
    let horizon = schedule.horizon_ms();
    Scenario::new(topo, MacPlan::Tdma { traffic: Traffic::Fixed { schedule } }, horizon)
}

fn conserved(t: &RunTrace) -> bool {
    let count = |o: Outcome| t.attempts.iter().filter(|a| a.outcome == o).count();
    t.attempts.len()
        == count(Outcome::Received) + count(Outcome::Collided) + count(Outcome::DeadlineMissed) + count(Outcome::Undeliverable)
}

fn toa_ms(sf: u8) -> f64 {
    phy::time_on_air(&RadioConfig::default().with_spreading_factor(sf), DEFAULT_PAYLOAD_LEN).unwrap()
}

#[test]
fn empty_schedule_has_no_attempts() {
    let s = tdma(topology(vec![master(0, vec![radio(0, 7, 0)])]), Schedule::empty(10_000).unwrap());
    let t = run(&s, 1).unwrap();
    assert!(t.attempts.is_empty());
    assert!(t.receptions.is_empty());
    assert_eq!(t.energy.len(), 1);
}

#[test]
fn payload_text() {
    assert_eq!(payload_for(0, 0, 21), b"Packet 0 from Radio 1");
    assert_eq!(payload_for(2, 7, 23), b"Packet 7 from Radio 3  ");
    assert_eq!(payload_for(0, 100, 10), b"Packet 100");
}

#[test]
fn sf_sweep_on_one_channel_never_collides() {
    // Three radios on one master, all on 867.3 MHz, SF 7/8/9.
    let ch = ChannelTable::default().index_of(867_300_000).unwrap();
    let topo = topology(vec![master(0, vec![radio(0, 7, ch), radio(1, 8, ch), radio(2, 9, ch)])]);
    let s = generate_periodic(3, 1_200, &[0, 400, 800], &[7, 8, 9], &[ch; 3], 60_000).unwrap();
    let t = run(&tdma(topo, s), 3).unwrap();
    assert_eq!(t.attempts.len(), 51 + 50 + 50);
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::Received), "{:?}", t.attempts.iter().find(|a| a.outcome != Outcome::Received));
    assert_eq!(t.receptions.len(), t.attempts.len());
    assert!(t.receptions.iter().all(|r| r.frequency_hz == 867_300_000));
}

#[test]
fn identical_schedules_on_two_masters_all_collide() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 2)]), master(1, vec![radio(1, 7, 2)])]);
    let s = generate_periodic(2, 500, &[0, 0], &[7, 7], &[2, 2], 20_000).unwrap();
    let mut scenario = tdma(topo.clone(), s);
    assert!(matches!(run(&scenario, 1), Err(EngineError::Infeasible { .. })));
    scenario.validation = ValidationPolicy::Off;
    let t = run(&scenario, 1).unwrap();

    // Pairwise-overlap oracle over the frames actually sent.
    for a in &t.attempts {
        let a_end = a.actual_start + a.toa;
        let overlapped = t.attempts.iter().any(|b| {
            b.attempt_id != a.attempt_id
                && b.channel_index == a.channel_index
                && b.spreading_factor == a.spreading_factor
                && b.actual_start < a_end
                && a.actual_start < b.actual_start + b.toa
        });
        assert!(overlapped);
        assert_eq!(a.outcome, Outcome::Collided);
        assert_eq!(a.loss_cause, Some(LossCause::Collision));
    }
    assert!(t.receptions.is_empty());

    // Bus-only validation lets the air conflicts through as well.
    scenario.validation = ValidationPolicy::BusOnly;
    assert_eq!(run(&scenario, 1).unwrap().attempts, t.attempts);
}

#[test]
fn capture_lets_the_stronger_frame_through() {
    let mut near = master(0, vec![radio(0, 7, 2)]);
    near.position_m = [45.0, 0.0];
    let mut topo = topology(vec![near, master(1, vec![radio(1, 7, 2)])]);
    topo.link_model.shadowing_sigma_db = 0.0;
    topo.link_model.capture_threshold_db = Some(6.0);
    let s = generate_periodic(2, 500, &[0, 0], &[7, 7], &[2, 2], 5_000).unwrap();
    let mut scenario = tdma(topo, s);
    scenario.validation = ValidationPolicy::Off;
    let t = run(&scenario, 1).unwrap();
    for a in &t.attempts {
        let want = if a.node_id == 0 { Outcome::Received } else { Outcome::Collided };
        assert_eq!(a.outcome, want);
    }
}

#[test]
fn simultaneous_releases_serialize_on_the_bus() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0), radio(1, 7, 0), radio(2, 7, 0)])]);
    let s = generate_periodic(3, 1_000, &[0, 0, 0], &[7; 3], &[0; 3], 1).unwrap();
    let mut scenario = tdma(topo, s);
    scenario.validation = ValidationPolicy::Off;
    let t = run(&scenario, 9).unwrap();
    let starts: Vec<u64> = t.attempts.iter().map(|a| a.actual_start.as_us()).collect();
    let hold = SimTime::from_ms_f64(toa_ms(7) + DEFAULT_BUS_OVERHEAD_MS).as_us();
    assert_eq!(starts, vec![0, hold, 2 * hold]);
    // FIFO by node id.
    assert_eq!(t.attempts.iter().map(|a| a.node_id).collect::<Vec<_>>(), vec![0, 1, 2]);
    // Same bus, so no collisions even on the same channel and SF.
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::Received));
}

#[test]
fn feasible_single_radio_has_zero_release_error() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let s = generate_periodic(1, 91, &[0], &[7], &[0], 91 * 1_100).unwrap();
    let t = run(&tdma(topo, s), 4).unwrap();
    assert!(t.attempts.len() >= 1_000);
    assert!(t.attempts.iter().all(|a| a.release_error_ms() == 0.0));
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::Received));
    let latency = t.attempts[0].latency_ms().unwrap();
    assert_eq!(latency, toa_ms(7));
}

#[test]
fn sf12_after_sf7_uses_the_event_parameters() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let events = vec![
        crate::schedule::ScheduleEvent { node_id: 0, release_time_ms: 0, spreading_factor: 7, channel_index: 0 },
        crate::schedule::ScheduleEvent { node_id: 0, release_time_ms: 1_000, spreading_factor: 12, channel_index: 3 },
    ];
    let t = run(&tdma(topo, Schedule::new(events, 5_000, None).unwrap()), 0).unwrap();
    assert_eq!(t.attempts[1].spreading_factor, 12);
    assert_eq!(t.attempts[1].channel_index, 3);
    assert_eq!(t.attempts[1].toa, SimTime::from_us(1_810_432));
    assert_eq!(t.receptions[1].spreading_factor, 12);
}

#[test]
fn far_gateway_loses_frames_below_the_floor() {
    let mut topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    topo.gateway_position_m = [50_000.0, 0.0];
    topo.link_model.shadowing_sigma_db = 0.0;
    let s = generate_periodic(1, 1_000, &[0], &[7], &[0], 10_000).unwrap();
    let t = run(&tdma(topo, s), 0).unwrap();
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::Undeliverable && a.loss_cause == Some(LossCause::BelowFloor)));
    assert!(conserved(&t));
}

#[test]
fn tight_relative_deadline_marks_frames_late() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let s = generate_periodic(1, 1_000, &[0], &[7], &[0], 10_000).unwrap();
    let mut scenario = tdma(topo, s);
    scenario.deadline = DeadlinePolicy::Relative { ms: 50.0 };
    let t = run(&scenario, 0).unwrap();
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::DeadlineMissed && a.arrival.is_some()));
    assert_eq!(t.receptions.len(), t.attempts.len());
}

#[test]
fn csma_hops_off_a_busy_channel() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0), radio(1, 7, 0)])]);
    let mut s = Scenario::new(
        topo,
        MacPlan::Csma { traffic: Traffic::Periodic { period_ms: 1_000, phases_ms: None }, params: CsmaParams::default() },
        20_000,
    );
    s.background = vec![BusyWindow { channel_index: 0, start_ms: 0.0, end_ms: 1e9 }];
    let t = run(&s, 5).unwrap();
    assert_eq!(t.attempts.len(), 21 + 20);
    for a in &t.attempts {
        assert_eq!((a.backoffs, a.hops, a.channel_index), (1, 1, 1));
        assert_eq!(a.outcome, Outcome::Received);
        assert!(a.release_error_ms() >= 2.0 + 10.0 + 2.0);
    }
    let backoffs: u64 = t.energy.iter().map(|e| e.backoffs).sum();
    assert_eq!(backoffs, 41);
}

#[test]
fn csma_gives_up_when_everything_is_busy() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let params = CsmaParams { max_hops: 3, ..CsmaParams::default() };
    let mut s = Scenario::new(
        topo,
        MacPlan::Csma { traffic: Traffic::Periodic { period_ms: 2_000, phases_ms: None }, params },
        10_000,
    );
    s.background = (0..8).map(|c| BusyWindow { channel_index: c, start_ms: 0.0, end_ms: 1e9 }).collect();
    let t = run(&s, 5).unwrap();
    for a in &t.attempts {
        assert_eq!(a.outcome, Outcome::Undeliverable);
        assert_eq!(a.loss_cause, Some(LossCause::ChannelBusy));
        assert_eq!((a.hops, a.backoffs), (3, 3));
        assert!(!a.transmitted);
    }
    assert!(t.energy.iter().all(|e| e.transmissions == 0));
}

#[test]
fn csma_nodes_on_different_masters_defer_to_each_other() {
    // Both release together on the same channel; the second to finish
    // sensing sees the first on air and hops.
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)]), master(1, vec![radio(1, 7, 0)])]);
    let s = Scenario::new(
        topo,
        MacPlan::Csma { traffic: Traffic::Periodic { period_ms: 1_000, phases_ms: Some(vec![0, 0]) }, params: CsmaParams::default() },
        10_000,
    );
    let t = run(&s, 2).unwrap();
    assert!(t.attempts.iter().all(|a| a.outcome == Outcome::Received));
    assert!(t.attempts.iter().any(|a| a.hops == 1));
}

#[test]
fn clock_error_stays_bounded_for_an_hour() {
    let mut m = master(0, vec![radio(0, 7, 0)]);
    m.clock = ClockModel::default();
    let mut s = tdma(topology(vec![m]), Schedule::empty(3_600_000).unwrap());
    s.clock_sample_ms = Some(1_000);
    let t = run(&s, 11).unwrap();
    let bound = 1.0 + 20e-6 * 64_000.0;
    assert!(t.clock_samples.len() > 3_600);
    assert!(t.clock_samples.iter().all(|c| c.error_ms.abs() <= bound));
    assert!(t.clock_samples.iter().filter(|c| c.at_sync).all(|c| c.error_ms.abs() <= 1.0));
}

#[test]
fn drifting_clock_never_releases_early() {
    let mut m = master(0, vec![radio(0, 7, 0)]);
    m.clock = ClockModel { drift_ppm: -200.0, initial_offset_ms: -3.0, sync_enabled: false, ..ClockModel::default() };
    let s = generate_periodic(1, 1_000, &[0], &[7], &[0], 200_000).unwrap();
    let t = run(&tdma(topology(vec![m.clone()]), s.clone()), 8).unwrap();
    // A slow clock reaches each local release late in global time, and
    // without correction the lag keeps growing.
    assert!(t.attempts.iter().all(|a| a.release_error_ms() >= 0.0));
    assert!(t.attempts.last().unwrap().release_error_ms() > 40.0);

    // With correction the lag stays within the clock bound.
    m.clock.sync_enabled = true;
    let bound = m.clock.error_bound_ms().max(3.0 + 200e-6 * 64_000.0);
    let t = run(&tdma(topology(vec![m]), s), 8).unwrap();
    assert!(t.attempts.iter().all(|a| a.release_error_ms().abs() <= bound + 0.001));
}

#[test]
fn invalid_scenarios_fail_before_running() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let s = generate_periodic(1, 1_000, &[0], &[7], &[0], 10_000).unwrap();
    let mut bad = tdma(topo.clone(), s.clone());
    bad.payload_len = 300;
    assert!(matches!(run(&bad, 0), Err(EngineError::InvalidScenario(_))));
    let mut bad = tdma(topo.clone(), s.clone());
    bad.background = vec![BusyWindow { channel_index: 42, start_ms: 0.0, end_ms: 1.0 }];
    assert!(matches!(run(&bad, 0), Err(EngineError::Phy(_))));
    let unknown = generate_periodic(2, 1_000, &[0, 500], &[7, 7], &[0, 0], 10_000).unwrap();
    assert!(matches!(run(&tdma(topo, unknown), 0), Err(EngineError::Schedule(ScheduleError::UnknownNode(1)))));
}

#[test]
fn trace_roundtrips_through_jsonl() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)]), master(1, vec![radio(1, 7, 0)])]);
    let mut s = Scenario::new(topo, MacPlan::Tdma { traffic: Traffic::Aperiodic { events: 60, seed: None } }, 10_000);
    s.validation = ValidationPolicy::Off;
    s.clock_sample_ms = Some(5_000);
    let t = run(&s, 21).unwrap();
    let text = t.to_jsonl();
    assert!(text.starts_with("{\"type\":\"run\",\"seed\":21,"));
    let back = RunTrace::from_jsonl(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_jsonl(), text);
    assert!(matches!(RunTrace::from_jsonl("{\"type\":\"attempt\"}"), Err(TraceError::Json { line: 1, .. })));
    assert!(matches!(RunTrace::from_jsonl(""), Err(TraceError::MissingHeader)));
}

#[test]
fn digest_tracks_content() {
    let topo = topology(vec![master(0, vec![radio(0, 7, 0)])]);
    let a = Scenario::new(topo.clone(), MacPlan::Tdma { traffic: Traffic::Periodic { period_ms: 100, phases_ms: None } }, 1_000);
    let mut b = a.clone();
    assert_eq!(a.digest(), b.digest());
    b.horizon_ms += 1;
    assert_ne!(a.digest(), b.digest());
    assert_eq!(a.digest().len(), 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random aperiodic traffic over random small topologies: runs are
    /// deterministic, conserve attempts, respect bus exclusivity and never
    /// start before release.
    #[test]
    fn run_invariants(
        seed in any::<u64>(),
        buses in prop::collection::vec(1usize..4, 1..4),
        events in 0usize..60,
        csma in any::<bool>(),
        sf in 7u8..10,
    ) {
        let mut next = 0u32;
        let masters: Vec<MasterSpec> = buses
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let radios = (0..n).map(|_| { next += 1; radio(next - 1, sf, (next as usize) % 2) }).collect();
                let mut m = master(i as u32, radios);
                m.clock = ClockModel::default();
                m
            })
            .collect();
        let traffic = Traffic::Aperiodic { events, seed: None };
        let mac = if csma {
            MacPlan::Csma { traffic, params: CsmaParams::default() }
        } else {
            MacPlan::Tdma { traffic }
        };
        let mut s = Scenario::new(topology(masters), mac, 5_000);
        s.validation = ValidationPolicy::Off;
        let t = run(&s, seed).unwrap();
        prop_assert_eq!(&run(&s, seed).unwrap(), &t);
        prop_assert_eq!(t.attempts.len(), events);
        prop_assert!(conserved(&t));

        let overhead = SimTime::from_ms_f64(DEFAULT_BUS_OVERHEAD_MS);
        let mut per_bus: BTreeMap<u32, Vec<(SimTime, SimTime)>> = BTreeMap::new();
        for a in t.attempts.iter().filter(|a| a.transmitted) {
            prop_assert!(a.actual_start >= a.scheduled_release.saturating_sub(SimTime::from_ms(3)));
            per_bus.entry(a.master_id).or_default().push((a.actual_start, a.actual_start + a.toa + overhead));
        }
        for windows in per_bus.values_mut() {
            windows.sort();
            prop_assert!(windows.windows(2).all(|w| w[0].1 <= w[1].0));
        }
        let ids: Vec<u64> = t.receptions.iter().map(|r| r.attempt_id).collect();
        prop_assert!(ids.iter().all(|id| t.attempts[*id as usize].delivered()));
    }
}
