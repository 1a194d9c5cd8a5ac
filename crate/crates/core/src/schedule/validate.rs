use std::collections::BTreeMap;

use serde::Serialize;

use super::{Schedule, ScheduleError};
use crate::phy::{self, ChannelTable, RadioConfig};
use crate::time::SimTime;

/// Where a node sits: which serialized bus it shares, and its base air
/// parameters (SF and channel are overridden per event).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub node_id: u32,
    pub bus_id: u32,
    pub config: RadioConfig,
}

/// A pair of schedule events (indices into `Schedule::events`) that cannot
/// both happen as written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conflict {
    /// Both events need the same bus at once.
    Bus { bus_id: u32, first: usize, second: usize },
    /// Events on different buses whose frames would overlap on air with the
    /// same channel and SF.
    Air { channel_index: usize, spreading_factor: u8, first: usize, second: usize },
}

struct Window {
    index: usize,
    bus_id: u32,
    start: SimTime,
    air_end: SimTime,
    bus_end: SimTime,
}

/// Lists every conflict in `schedule`. An empty list means the schedule is
/// feasible as written.
///
/// Each event occupies its bus over `[release, release + ToA + overhead)` and
/// the air over `[release, release + ToA)`.
pub fn validate_schedule(
    schedule: &Schedule,
    placements: &[Placement],
    channels: &ChannelTable,
    payload_len: usize,
    bus_overhead_ms: f64,
) -> Result<Vec<Conflict>, ScheduleError> {
    let by_node: BTreeMap<u32, &Placement> = placements.iter().map(|p| (p.node_id, p)).collect();
    let overhead = SimTime::from_ms_f64(bus_overhead_ms);

    let mut bus_groups: BTreeMap<u32, Vec<Window>> = BTreeMap::new();
    let mut air_groups: BTreeMap<(usize, u8), Vec<Window>> = BTreeMap::new();
    for (index, ev) in schedule.events().iter().enumerate() {
        let place = by_node.get(&ev.node_id).ok_or(ScheduleError::UnknownNode(ev.node_id))?;
        channels.frequency_hz(ev.channel_index)?;
        let cfg = place.config.with_spreading_factor(ev.spreading_factor).with_channel(ev.channel_index);
        let toa = phy::airtime(&cfg, payload_len)?;
        let start = SimTime::from_ms(ev.release_time_ms);
        let window = |index| Window { index, bus_id: place.bus_id, start, air_end: start + toa, bus_end: start + toa + overhead };
        bus_groups.entry(place.bus_id).or_default().push(window(index));
        air_groups.entry((ev.channel_index, ev.spreading_factor)).or_default().push(window(index));
    }

    let mut conflicts = Vec::new();
    for (bus_id, windows) in bus_groups {
        sweep(windows, |w| w.bus_end, |a, b| {
            conflicts.push(Conflict::Bus { bus_id, first: a.index.min(b.index), second: a.index.max(b.index) });
        });
    }
    for ((channel_index, spreading_factor), windows) in air_groups {
        sweep(windows, |w| w.air_end, |a, b| {
            if a.bus_id != b.bus_id {
                conflicts.push(Conflict::Air {
                    channel_index,
                    spreading_factor,
                    first: a.index.min(b.index),
                    second: a.index.max(b.index),
                });
            }
        });
    }
    conflicts.sort();
    Ok(conflicts)
}

/// Calls `hit` for every pair of half-open windows that overlap.
fn sweep(mut windows: Vec<Window>, end: impl Fn(&Window) -> SimTime, mut hit: impl FnMut(&Window, &Window)) {
    windows.sort_by_key(|w| (w.start, w.index));
    let mut open: Vec<&Window> = Vec::new();
    for w in &windows {
        open.retain(|o| end(o) > w.start);
        for o in &open {
            hit(o, w);
        }
        open.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{generate_periodic, min_period, ScheduleEvent};
    use proptest::prelude::*;

    const OVERHEAD: f64 = 19.1;

    fn placements(buses: &[u32]) -> Vec<Placement> {
        buses
            .iter()
            .enumerate()
            .map(|(i, &bus_id)| Placement { node_id: i as u32, bus_id, config: RadioConfig::default() })
            .collect()
    }

    /// Brute-force interval oracle over all event pairs.
    fn oracle(s: &Schedule, places: &[Placement]) -> Vec<Conflict> {
        let win = |e: &ScheduleEvent| {
            let cfg = RadioConfig::default().with_spreading_factor(e.spreading_factor);
            let toa = phy::time_on_air(&cfg, 21).unwrap();
            let t = e.release_time_ms as f64;
            (t, t + toa, t + toa + OVERHEAD)
        };
        let mut out = Vec::new();
        let ev = s.events();
        for i in 0..ev.len() {
            for j in i + 1..ev.len() {
                let (a, b) = (&ev[i], &ev[j]);
                let (pa, pb) = (places[a.node_id as usize], places[b.node_id as usize]);
                let (sa, aa, ba) = win(a);
                let (sb, ab, bb) = win(b);
                if pa.bus_id == pb.bus_id && sa < bb && sb < ba {
                    out.push(Conflict::Bus { bus_id: pa.bus_id, first: i, second: j });
                }
                if pa.bus_id != pb.bus_id
                    && a.channel_index == b.channel_index
                    && a.spreading_factor == b.spreading_factor
                    && sa < ab
                    && sb < aa
                {
                    out.push(Conflict::Air {
                        channel_index: a.channel_index,
                        spreading_factor: a.spreading_factor,
                        first: i,
                        second: j,
                    });
                }
            }
        }
        out.sort();
        out
    }

    fn check(s: &Schedule, buses: &[u32]) -> Vec<Conflict> {
        validate_schedule(s, &placements(buses), &ChannelTable::default(), 21, OVERHEAD).unwrap()
    }

    #[test]
    fn single_node_at_min_period_is_feasible() {
        let p = min_period(7, 21, 1, OVERHEAD, &RadioConfig::default()).unwrap().ceil() as u64;
        let s = generate_periodic(1, p, &[0], &[7], &[0], 60_000).unwrap();
        assert!(check(&s, &[0]).is_empty());
    }

    #[test]
    fn simultaneous_releases_on_one_bus_conflict() {
        let s = generate_periodic(3, 150, &[0; 3], &[7; 3], &[0; 3], 1_000).unwrap();
        let c = check(&s, &[0, 0, 0]);
        assert!(!c.is_empty());
        assert!(c.iter().all(|c| matches!(c, Conflict::Bus { .. })));
        assert_eq!(c, oracle(&s, &placements(&[0, 0, 0])));
    }

    #[test]
    fn same_slot_on_different_buses_is_an_air_conflict() {
        let s = generate_periodic(2, 1000, &[0, 0], &[7, 7], &[1, 1], 500).unwrap();
        assert_eq!(
            check(&s, &[0, 1]),
            vec![Conflict::Air { channel_index: 1, spreading_factor: 7, first: 0, second: 1 }]
        );
        // Same bus instead: only the bus conflict remains.
        assert_eq!(check(&s, &[0, 0]), vec![Conflict::Bus { bus_id: 0, first: 0, second: 1 }]);
    }

    #[test]
    fn unknown_node_and_channel_are_errors() {
        let s = generate_periodic(2, 1000, &[0, 0], &[7, 7], &[1, 1], 500).unwrap();
        assert_eq!(
            validate_schedule(&s, &placements(&[0]), &ChannelTable::default(), 21, OVERHEAD),
            Err(ScheduleError::UnknownNode(1))
        );
        let s = generate_periodic(1, 1000, &[0], &[7], &[9], 500).unwrap();
        assert!(matches!(
            validate_schedule(&s, &placements(&[0]), &ChannelTable::default(), 21, OVERHEAD),
            Err(ScheduleError::Phy(_))
        ));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((0u32..4, 0u64..600, 7u8..9, 0usize..2), 0..12),
            buses in prop::collection::vec(0u32..2, 4),
        ) {
            let mut events: Vec<ScheduleEvent> = raw
                .into_iter()
                .map(|(node_id, t, sf, ch)| ScheduleEvent { node_id, release_time_ms: t, spreading_factor: sf, channel_index: ch })
                .collect();
            events.sort_by_key(|e| (e.release_time_ms, e.node_id));
            let s = Schedule::new(events, 1_000, None).unwrap();
            prop_assert_eq!(check(&s, &buses), oracle(&s, &placements(&buses)));
        }

        #[test]
        fn staggered_feasible_periods_have_no_conflicts(nodes in 1usize..4, extra in 0u64..200) {
            let cfg = RadioConfig::default();
            let slot = (phy::time_on_air(&cfg, 21).unwrap() + OVERHEAD).ceil() as u64 + extra;
            let period = slot * nodes as u64;
            let phases: Vec<u64> = (0..nodes as u64).map(|i| i * slot).collect();
            let s = generate_periodic(nodes, period, &phases, &vec![7; nodes], &vec![0; nodes], 20_000).unwrap();
            prop_assert!(check(&s, &vec![0; nodes]).is_empty());
        }
    }
}
