use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// A frame as seen by the gateway arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOnAir {
    pub id: u64,
    pub channel_index: usize,
    pub spreading_factor: u8,
    pub start: SimTime,
    pub end: SimTime,
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameFate {
    Survives,
    Collided,
}

/// Decides which frames survive contention.
///
/// Two frames conflict when they share channel and SF and their airtime
/// intervals overlap with positive measure (touching endpoints do not
/// conflict). Different SFs are treated as orthogonal. Without a capture
/// threshold every conflicting frame is lost. With a threshold, a frame
/// survives only if it is at least `threshold` dB stronger than every frame
/// it conflicts with.
pub fn arbitrate_collisions(frames: &[FrameOnAir], capture_threshold_db: Option<f64>) -> BTreeMap<u64, FrameFate> {
    // Bucket by (channel, sf), then sweep each bucket in start order keeping
    // the frames whose airtime is still open.
    let mut buckets: BTreeMap<(usize, u8), Vec<&FrameOnAir>> = BTreeMap::new();
    for f in frames {
        buckets.entry((f.channel_index, f.spreading_factor)).or_default().push(f);
    }

    // Weakest margin each frame holds over any rival; +inf when unopposed.
    let mut margin: BTreeMap<u64, f64> = frames.iter().map(|f| (f.id, f64::INFINITY)).collect();

    for bucket in buckets.values_mut() {
        bucket.sort_by_key(|f| (f.start, f.end, f.id));
        let mut open: Vec<&FrameOnAir> = Vec::new();
        for &f in bucket.iter() {
            open.retain(|g| g.end > f.start);
            for &g in &open {
                let m = margin.get_mut(&f.id).expect("known frame");
                *m = m.min(f.rssi_dbm - g.rssi_dbm);
                let m = margin.get_mut(&g.id).expect("known frame");
                *m = m.min(g.rssi_dbm - f.rssi_dbm);
            }
            open.push(f);
        }
    }

    margin
        .into_iter()
        .map(|(id, m)| {
            let survives = m.is_infinite() || capture_threshold_db.is_some_and(|t| m >= t);
            (id, if survives { FrameFate::Survives } else { FrameFate::Collided })
        })
        .collect()
}
