use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::RunTrace;
use crate::mac::{AttemptRecord, DeadlinePolicy, Outcome};

/// Mean and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMax {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stdev: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Spread {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            stdev: var.sqrt(),
        })
    }
}

/// Mean received signal for one SF or one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkStats {
    pub key: u64,
    pub count: usize,
    pub mean_rssi_dbm: f64,
    pub mean_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sent: usize,
    /// Decoded by the gateway, on time or late.
    pub received: usize,
    pub on_time: usize,
    pub collided: usize,
    pub deadline_missed: usize,
    pub undeliverable: usize,
    pub plr: f64,
    pub prr: f64,
    pub prr_with_deadlines: f64,
    /// Gateway arrival minus air start, over decoded frames.
    pub latency_ms: Option<MeanMax>,
    /// Air start minus scheduled release, over frames that went on air.
    pub release_error_ms: Option<Spread>,
    pub per_sf: Vec<LinkStats>,
    pub per_channel: Vec<LinkStats>,
}

/// Loss and timing metrics of a trace.
///
/// `received` counts every decoded frame, late or not, so `prr = received /
/// sent` and `plr = 1 - prr`. `prr_with_deadlines` counts only frames that
/// arrived by their deadline. With `deadlines` the deadline of every attempt
/// is recomputed from that policy; without, the deadlines recorded in the
/// trace apply. An empty trace reports no loss: `plr = 0`, `prr = 1`.
pub fn compute_metrics(trace: &RunTrace, deadlines: Option<&DeadlinePolicy>) -> MetricsReport {
    let attempts = &trace.attempts;
    let count = |o: Outcome| attempts.iter().filter(|a| a.outcome == o).count();
    let sent = attempts.len();
    let received = attempts.iter().filter(|a| a.delivered()).count();
    let on_time = attempts.iter().filter(|a| on_time(a, deadlines, trace.period_ms)).count();

    let (prr, prr_with_deadlines) = if sent == 0 {
        (1.0, 1.0)
    } else {
        (received as f64 / sent as f64, on_time as f64 / sent as f64)
    };

    let latencies: Vec<f64> = attempts.iter().filter(|a| a.delivered()).filter_map(|a| a.latency_ms()).collect();
    let latency_ms = Spread::of(&latencies).map(|s| MeanMax { mean: s.mean, max: s.max });
    let errors: Vec<f64> = attempts.iter().filter(|a| a.transmitted).map(AttemptRecord::release_error_ms).collect();

    let delivered: Vec<&AttemptRecord> = attempts.iter().filter(|a| a.delivered()).collect();
    MetricsReport {
        sent,
        received,
        on_time,
        collided: count(Outcome::Collided),
        deadline_missed: if deadlines.is_some() { received - on_time } else { count(Outcome::DeadlineMissed) },
        undeliverable: count(Outcome::Undeliverable),
        plr: 1.0 - prr,
        prr,
        prr_with_deadlines,
        latency_ms,
        release_error_ms: Spread::of(&errors),
        per_sf: breakdown(&delivered, |a| u64::from(a.spreading_factor)),
        per_channel: breakdown(&delivered, |a| a.channel_index as u64),
    }
}

fn on_time(a: &AttemptRecord, policy: Option<&DeadlinePolicy>, period_ms: Option<u64>) -> bool {
    if !a.delivered() {
        return false;
    }
    let deadline = match policy {
        Some(p) => p.deadline_for(a.scheduled_release, period_ms),
        None => a.deadline,
    };
    match (deadline, a.arrival) {
        (Some(d), Some(arrival)) => arrival <= d,
        _ => true,
    }
}

/// Mean RSSI/SNR of `(key, rssi, snr)` samples grouped by key, ascending.
pub fn link_breakdown(samples: impl IntoIterator<Item = (u64, f64, f64)>) -> Vec<LinkStats> {
    let mut groups: BTreeMap<u64, (usize, f64, f64)> = BTreeMap::new();
    for (key, rssi, snr) in samples {
        let g = groups.entry(key).or_insert((0, 0.0, 0.0));
        g.0 += 1;
        g.1 += rssi;
        g.2 += snr;
    }
    groups
        .into_iter()
        .map(|(key, (count, rssi, snr))| LinkStats {
            key,
            count,
            mean_rssi_dbm: rssi / count as f64,
            mean_snr_db: snr / count as f64,
        })
        .collect()
}

fn breakdown(delivered: &[&AttemptRecord], key: impl Fn(&AttemptRecord) -> u64) -> Vec<LinkStats> {
    link_breakdown(delivered.iter().filter_map(|a| Some((key(a), a.rssi_dbm?, a.snr_db?))))
}
