use proptest::prelude::*;

use super::*;
use crate::engine::{Reception, RunTrace};
use crate::mac::{AttemptRecord, DeadlinePolicy, MacKind, Outcome};
use crate::phy::{self, Bandwidth, ChannelTable, RadioConfig};
use crate::schedule::min_period;
use crate::time::SimTime;

fn attempt(id: u64, outcome: Outcome) -> AttemptRecord {
    let release = SimTime::from_ms(1_000 * id);
    let toa = SimTime::from_us(70_912);
    let delivered = matches!(outcome, Outcome::Received | Outcome::DeadlineMissed);
    AttemptRecord {
        attempt_id: id,
        node_id: 0,
        master_id: 0,
        mac: MacKind::Tdma,
        packet_index: id,
        scheduled_release: release,
        actual_start: release,
        toa,
        spreading_factor: 7,
        channel_index: 0,
        backoffs: 0,
        hops: 0,
        transmitted: true,
        arrival: delivered.then_some(release + toa),
        deadline: Some(release + SimTime::from_ms(1_000)),
        rssi_dbm: delivered.then_some(-80.0),
        snr_db: delivered.then_some(8.0),
        outcome,
        loss_cause: None,
    }
}

fn trace(attempts: Vec<AttemptRecord>) -> RunTrace {
    RunTrace {
        seed: 0,
        digest: String::new(),
        mac: MacKind::Tdma,
        horizon: SimTime::from_ms(100_000),
        period_ms: Some(1_000),
        attempts,
        receptions: Vec::new(),
        energy: Vec::new(),
        clock_samples: Vec::new(),
    }
}

#[test]
fn one_loss_in_84() {
    let mut a: Vec<AttemptRecord> = (0..84).map(|i| attempt(i, Outcome::Received)).collect();
    a[17] = attempt(17, Outcome::Collided);
    let m = compute_metrics(&trace(a), None);
    assert_eq!((m.sent, m.received), (84, 83));
    assert!((m.plr - 1.0 / 84.0).abs() < 1e-15);
    assert!((m.plr - 0.0119047619).abs() < 1e-10);
    assert_eq!(m.prr + m.plr, 1.0);
}

#[test]
fn all_received_and_empty_traces() {
    let m = compute_metrics(&trace((0..5).map(|i| attempt(i, Outcome::Received)).collect()), None);
    assert_eq!((m.plr, m.prr, m.prr_with_deadlines), (0.0, 1.0, 1.0));
    let e = compute_metrics(&trace(vec![]), None);
    assert_eq!((e.sent, e.received, e.plr, e.prr, e.prr_with_deadlines), (0, 0, 0.0, 1.0, 1.0));
    assert!(e.latency_ms.is_none() && e.release_error_ms.is_none());
}

#[test]
fn release_error_spread() {
    let a: Vec<AttemptRecord> = [-1i64, 1, 3, 2, 3]
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut r = attempt(i as u64 + 1, Outcome::Received);
            r.actual_start = SimTime::from_us((r.scheduled_release.as_us() as i64 + d * 1_000) as u64);
            r
        })
        .collect();
    let s = compute_metrics(&trace(a), None).release_error_ms.unwrap();
    assert_eq!((s.min, s.max), (-1.0, 3.0));
    assert!((s.mean - 1.6).abs() < 1e-12);
    let var = [-1.0f64, 1.0, 3.0, 2.0, 3.0].iter().map(|v| (v - 1.6).powi(2)).sum::<f64>() / 5.0;
    assert!((s.stdev - var.sqrt()).abs() < 1e-12);
}

#[test]
fn late_frames_count_as_received_but_not_on_time() {
    let a = vec![attempt(0, Outcome::Received), attempt(1, Outcome::DeadlineMissed), attempt(2, Outcome::Collided)];
    let m = compute_metrics(&trace(a.clone()), None);
    assert_eq!((m.received, m.on_time, m.deadline_missed), (2, 2, 1));
    // Recorded deadlines say both delivered frames were on time by arrival;
    // a tight recomputed deadline flips them.
    let tight = compute_metrics(&trace(a), Some(&DeadlinePolicy::Relative { ms: 10.0 }));
    assert_eq!((tight.on_time, tight.deadline_missed), (0, 2));
    assert_eq!(tight.prr, m.prr);
}

#[test]
fn per_sf_breakdown_groups_delivered_frames() {
    let mut a = vec![attempt(0, Outcome::Received), attempt(1, Outcome::Received), attempt(2, Outcome::Collided)];
    a[1].spreading_factor = 9;
    a[1].snr_db = Some(13.0);
    let m = compute_metrics(&trace(a), None);
    assert_eq!(m.per_sf.iter().map(|s| (s.key, s.count, s.mean_snr_db)).collect::<Vec<_>>(), vec![(7, 1, 8.0), (9, 1, 13.0)]);
    assert_eq!(m.per_channel.len(), 1);
    assert_eq!(m.per_channel[0].count, 2);
}

#[test]
fn csma_overhead_for_206_backoffs() {
    let a: Vec<AttemptRecord> = (0..206)
        .map(|i| {
            let mut r = attempt(i, Outcome::Received);
            r.backoffs = 1;
            r.hops = 1;
            r
        })
        .collect();
    let e = compute_energy(&trace(a), 5.0, 0.7, 0.356).unwrap();
    assert_eq!(e.backoffs, 206);
    assert_eq!(e.csma_overhead_mj, 73.336);
    assert_eq!(e.total_mj, e.tx_energy_mj + 73.336);
}

#[test]
fn tdma_energy_is_airtime_only() {
    let e = compute_energy(&trace(vec![attempt(0, Outcome::Received)]), 5.0, 0.7, 0.356).unwrap();
    assert_eq!(e.tx_energy_mj, 248.192);
    assert_eq!(e.csma_overhead_mj, 0.0);
    assert_eq!(e.total_mj, 248.192);

    let mut silent = attempt(1, Outcome::Undeliverable);
    silent.transmitted = false;
    let e = compute_energy(&trace(vec![silent]), 5.0, 0.7, 0.356).unwrap();
    assert_eq!(e.tx_energy_mj, 0.0);

    assert!(compute_energy(&trace(vec![]), 0.0, 0.7, 0.356).is_err());
    assert!(compute_energy(&trace(vec![]), 5.0, -0.7, 0.356).is_err());
    assert!(compute_energy(&trace(vec![]), 5.0, 0.7, -1.0).is_err());
}

#[test]
fn empirical_min_period_tracks_the_analytic_bound() {
    let search = MinPeriodSearch::default();
    let cfg = RadioConfig::default();
    for (radios, bounds, expect) in [(1usize, (60, 200), 91u64), (3, (200, 400), 271)] {
        let analytic = min_period(7, 21, radios, 19.1, &cfg).unwrap();
        let found = find_min_period_empirical(&search, 7, radios, bounds).unwrap();
        assert_eq!(found.period_ms, expect);
        assert!((found.period_ms as f64 - analytic).abs() <= 1.0, "{} vs {analytic}", found.period_ms);
        assert!(found.probes.len() <= 2 + 8);
    }
}

#[test]
fn empirical_min_period_errors() {
    let search = MinPeriodSearch::default();
    let toa = phy::time_on_air(&RadioConfig::default(), 21).unwrap();
    // Below the airtime nothing can keep up.
    assert!(!search.probe(7, 1, toa.floor() as u64).unwrap());
    assert!(matches!(
        find_min_period_empirical(&search, 7, 1, (95, 200)),
        Err(AnalysisError::InvalidBracket { reason: "lower bound already passes", .. })
    ));
    assert!(matches!(
        find_min_period_empirical(&search, 7, 1, (10, 50)),
        Err(AnalysisError::InvalidBracket { reason: "upper bound fails", .. })
    ));
    assert!(matches!(find_min_period_empirical(&search, 7, 1, (50, 50)), Err(AnalysisError::InvalidBracket { .. })));
    assert_eq!(find_min_period_empirical(&search, 7, 0, (50, 100)), Err(AnalysisError::ZeroRadios));
}

const FIRST_GATEWAY_RECORD: &str = r#"{"rxpk":[{"tmst":4162173235,"chan":1,"rfch":1,"freq":868.100000,"stat":1,"modu":"LORA","datr":"SF12BW125","codr":"4/7","lsnr":7.5,"rssi":-84,"size":21,"data":"UGFja2V0IDAgZnJvbSBSYWRpbyAx"}]}"#;

#[test]
fn parses_a_gateway_record() {
    let p = parse_rxpk(FIRST_GATEWAY_RECORD).unwrap();
    assert_eq!(p.len(), 1);
    let p = &p[0];
    assert_eq!(p.freq_hz, 868_100_000);
    assert_eq!((p.spreading_factor, p.bandwidth, p.coding_rate), (12, Bandwidth::Khz125, 3));
    assert_eq!((p.lsnr_db, p.rssi_dbm, p.data.len()), (7.5, -84, 21));
    assert_eq!(p.data, b"Packet 0 from Radio 1");
    // Writing it back reproduces the line byte for byte.
    assert_eq!(format_rxpk(std::slice::from_ref(p)), format!("{FIRST_GATEWAY_RECORD}\n"));
}

#[test]
fn parser_tolerance_and_errors() {
    let extra = FIRST_GATEWAY_RECORD.replace("\"stat\":1,", "\"stat\":1,\"foo\":[1,2],");
    assert_eq!(parse_rxpk(&extra).unwrap(), parse_rxpk(FIRST_GATEWAY_RECORD).unwrap());
    assert_eq!(parse_rxpk("").unwrap(), vec![]);
    assert_eq!(parse_rxpk("\n\n").unwrap(), vec![]);

    let truncated = format!("{FIRST_GATEWAY_RECORD}\n{}", &FIRST_GATEWAY_RECORD[..60]);
    assert!(matches!(parse_rxpk(&truncated), Err(RxpkError::Json { line: 2, .. })));
    let missing = FIRST_GATEWAY_RECORD.replace("\"rssi\":-84,", "");
    assert_eq!(parse_rxpk(&missing), Err(RxpkError::MissingField { line: 1, field: "rssi" }));
    let bad_b64 = FIRST_GATEWAY_RECORD.replace("UGFja2V0IDAgZnJvbSBSYWRpbyAx", "UGFja2V0I!!gZnJvbSBSYWRpbyAx");
    assert!(matches!(parse_rxpk(&bad_b64), Err(RxpkError::Base64 { line: 1, .. })));
    let bad_datr = FIRST_GATEWAY_RECORD.replace("SF12BW125", "SF13BW125");
    assert!(matches!(parse_rxpk(&bad_datr), Err(RxpkError::InvalidField { field: "datr", .. })));
    let bad_size = FIRST_GATEWAY_RECORD.replace("\"size\":21", "\"size\":20");
    assert!(matches!(parse_rxpk(&bad_size), Err(RxpkError::InvalidField { field: "size", .. })));
    assert!(matches!(parse_rxpk("{\"stat\":{}}"), Err(RxpkError::MissingField { field: "rxpk", .. })));
}

#[test]
fn emits_from_simulated_receptions() {
    let r = Reception {
        attempt_id: 0,
        node_id: 0,
        arrival: SimTime::from_us((1u64 << 32) + 5),
        rssi_dbm: -84.4,
        snr_db: 7.46,
        spreading_factor: 12,
        bandwidth: Bandwidth::Khz125,
        coding_rate: 3,
        channel_index: 5,
        frequency_hz: 868_100_000,
        payload: b"Packet 0 from Radio 1".to_vec(),
    };
    let text = emit_rxpk(&[r], &ChannelTable::default()).unwrap();
    assert_eq!(
        text,
        "{\"rxpk\":[{\"tmst\":5,\"chan\":5,\"rfch\":0,\"freq\":868.100000,\"stat\":1,\"modu\":\"LORA\",\"datr\":\"SF12BW125\",\
         \"codr\":\"4/7\",\"lsnr\":7.5,\"rssi\":-84,\"size\":21,\"data\":\"UGFja2V0IDAgZnJvbSBSYWRpbyAx\"}]}\n"
    );
    assert_eq!(emit_rxpk(&[], &ChannelTable::default()).unwrap(), "");
}

prop_compose! {
    fn arb_rxpk()(
        tmst in any::<u32>(),
        chan in 0u32..16,
        rfch in 0u32..2,
        freq_hz in 863_000_000u64..870_000_000,
        stat in -1i32..2,
        sf in 7u8..=12,
        bw in prop::sample::select(Bandwidth::ALL.to_vec()),
        cr in 1u8..=4,
        lsnr_tenths in -300i32..300,
        rssi in -140i32..0,
        data in prop::collection::vec(any::<u8>(), 0..64),
    ) -> RxPk {
        RxPk {
            tmst, chan, rfch, freq_hz, stat,
            spreading_factor: sf, bandwidth: bw, coding_rate: cr,
            lsnr_db: f64::from(lsnr_tenths) / 10.0,
            rssi_dbm: rssi,
            data,
        }
    }
}

proptest! {
    #[test]
    fn rxpk_roundtrip(packets in prop::collection::vec(arb_rxpk(), 0..8)) {
        prop_assert_eq!(parse_rxpk(&format_rxpk(&packets)).unwrap(), packets);
    }

    /// On any outcome mix: prr + plr = 1, deadlines never raise PRR, and
    /// tightening a relative deadline never raises it either.
    #[test]
    fn metric_identities(
        outcomes in prop::collection::vec((0u8..4, 0u64..200), 0..60),
        a in 0.0f64..150.0,
        b in 0.0f64..150.0,
    ) {
        let attempts: Vec<AttemptRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, &(o, extra))| {
                let outcome = [Outcome::Received, Outcome::Collided, Outcome::DeadlineMissed, Outcome::Undeliverable][o as usize];
                let mut r = attempt(i as u64, outcome);
                r.arrival = r.arrival.map(|t| t + SimTime::from_ms(extra));
                r
            })
            .collect();
        let t = trace(attempts);
        let m = compute_metrics(&t, None);
        prop_assert_eq!(m.prr + m.plr, 1.0);
        prop_assert!(m.received <= m.sent);
        prop_assert!(m.prr_with_deadlines <= m.prr);
        let (tight, loose) = (a.min(b), a.max(b));
        let mt = compute_metrics(&t, Some(&DeadlinePolicy::Relative { ms: tight }));
        let ml = compute_metrics(&t, Some(&DeadlinePolicy::Relative { ms: loose }));
        prop_assert!(mt.prr_with_deadlines <= ml.prr_with_deadlines);
        prop_assert!(ml.prr_with_deadlines <= ml.prr);
    }
}

proptest! {
    /// With equal traffic, the TDMA view of a trace (same airtime, no
    /// backoffs) never costs more than the CSMA view.
    #[test]
    fn tdma_never_costs_more_than_csma(
        attempts in prop::collection::vec((any::<bool>(), 0u32..8), 0..40),
        backoff_mj in 0.0f64..5.0,
    ) {
        let csma: Vec<AttemptRecord> = attempts
            .iter()
            .enumerate()
            .map(|(i, &(tx, backoffs))| {
                let mut r = attempt(i as u64, Outcome::Received);
                r.mac = MacKind::Csma;
                r.transmitted = tx;
                r.backoffs = backoffs;
                r
            })
            .collect();
        let tdma: Vec<AttemptRecord> = csma.iter().cloned().map(|mut r| { r.mac = MacKind::Tdma; r.backoffs = 0; r }).collect();
        let c = compute_energy(&trace(csma), 5.0, 0.7, backoff_mj).unwrap();
        let t = compute_energy(&trace(tdma), 5.0, 0.7, backoff_mj).unwrap();
        prop_assert_eq!(t.tx_energy_mj, c.tx_energy_mj);
        prop_assert!(t.total_mj <= c.total_mj);
    }
}
