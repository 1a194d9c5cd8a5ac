//! CSV and plot-data renderings of analysis results.

use std::collections::BTreeMap;

use loratb::analysis::{EnergyReport, LinkStats, MetricsReport, RxPk};
use loratb::engine::RunTrace;
use loratb::mac::MacKind;
use loratb::phy::ChannelTable;

use crate::error::CliError;
use crate::output::{csv_text, fixed3, opt3, ratio};

/// Identifies which run a CSV row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunKey {
    pub seed: u64,
    pub digest: String,
}

impl RunKey {
    pub fn of(trace: &RunTrace) -> Self {
        RunKey { seed: trace.seed, digest: trace.digest.clone() }
    }
}

const METRICS_HEADER: [&str; 17] = [
    "seed",
    "digest",
    "sent",
    "received",
    "on_time",
    "collided",
    "deadline_missed",
    "undeliverable",
    "plr",
    "prr",
    "prr_with_deadlines",
    "latency_mean_ms",
    "latency_max_ms",
    "release_error_min_ms",
    "release_error_max_ms",
    "release_error_mean_ms",
    "release_error_stdev_ms",
];

/// One row per run. With `deadline_aware` the `prr` and `plr` columns count
/// only frames delivered by their deadline.
pub fn metrics_csv(rows: &[(RunKey, MetricsReport)], deadline_aware: bool) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, m)| {
            let prr = if deadline_aware { m.prr_with_deadlines } else { m.prr };
            let plr = if deadline_aware { 1.0 - m.prr_with_deadlines } else { m.plr };
            let err = m.release_error_ms;
            vec![
                k.seed.to_string(),
                k.digest.clone(),
                m.sent.to_string(),
                m.received.to_string(),
                m.on_time.to_string(),
                m.collided.to_string(),
                m.deadline_missed.to_string(),
                m.undeliverable.to_string(),
                ratio(plr),
                ratio(prr),
                ratio(m.prr_with_deadlines),
                opt3(m.latency_ms.map(|l| l.mean)),
                opt3(m.latency_ms.map(|l| l.max)),
                opt3(err.map(|e| e.min)),
                opt3(err.map(|e| e.max)),
                opt3(err.map(|e| e.mean)),
                opt3(err.map(|e| e.stdev)),
            ]
        })
        .collect();
    csv_text(METRICS_HEADER, &rows)
}

pub fn energy_csv(rows: &[(RunKey, MacKind, EnergyReport)]) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, mac, e)| {
            vec![
                k.seed.to_string(),
                k.digest.clone(),
                mac_name(*mac).to_owned(),
                fixed3(e.supply_voltage_v),
                fixed3(e.tx_current_a),
                fixed3(e.tx_time_ms),
                e.backoffs.to_string(),
                fixed3(e.tx_energy_mj),
                fixed3(e.csma_overhead_mj),
                fixed3(e.total_mj),
            ]
        })
        .collect();
    csv_text(
        [
            "seed",
            "digest",
            "mac",
            "supply_voltage_v",
            "tx_current_a",
            "tx_time_ms",
            "backoffs",
            "tx_energy_mj",
            "csma_overhead_mj",
            "total_mj",
        ],
        &rows,
    )
}

pub fn mac_name(mac: MacKind) -> &'static str {
    match mac {
        MacKind::Tdma => "tdma",
        MacKind::Csma => "csma",
    }
}

/// Mean RSSI/SNR per SF and per channel, one row per group and run.
pub fn links_csv(rows: &[(RunKey, MetricsReport)], channels: &ChannelTable) -> Result<String, CliError> {
    let mut out = Vec::new();
    for (k, m) in rows {
        for (group, stats) in [("sf", &m.per_sf), ("channel", &m.per_channel)] {
            for s in stats {
                let freq = if group == "channel" {
                    channels.frequency_hz(s.key as usize).map(mhz).unwrap_or_default()
                } else {
                    String::new()
                };
                out.push(vec![
                    k.seed.to_string(),
                    k.digest.clone(),
                    group.to_owned(),
                    s.key.to_string(),
                    freq,
                    s.count.to_string(),
                    fixed3(s.mean_rssi_dbm),
                    fixed3(s.mean_snr_db),
                ]);
            }
        }
    }
    csv_text(["seed", "digest", "group", "key", "frequency_mhz", "count", "mean_rssi_dbm", "mean_snr_db"], &out)
}

pub fn mhz(hz: u64) -> String {
    format!("{:.6}", hz as f64 / 1e6)
}

/// Whitespace-separated `x y` columns with a comment header, as gnuplot reads.
pub fn plot_data(title: &str, x: &str, y: &str, points: &[(String, String)]) -> String {
    let mut s = format!("# {title}\n# {x} {y}\n");
    for (a, b) in points {
        s.push_str(a);
        s.push(' ');
        s.push_str(b);
        s.push('\n');
    }
    s
}

/// RSSI and SNR against SF and against channel frequency.
pub fn link_plots(per_sf: &[LinkStats], per_freq_hz: &[LinkStats]) -> Vec<(&'static str, String)> {
    let sf = |f: fn(&LinkStats) -> f64| -> Vec<(String, String)> {
        per_sf.iter().map(|s| (s.key.to_string(), fixed3(f(s)))).collect()
    };
    let ch = |f: fn(&LinkStats) -> f64| -> Vec<(String, String)> {
        per_freq_hz.iter().map(|s| (mhz(s.key), fixed3(f(s)))).collect()
    };
    vec![
        ("rssi_vs_sf.dat", plot_data("mean RSSI per spreading factor", "sf", "rssi_dbm", &sf(|s| s.mean_rssi_dbm))),
        ("snr_vs_sf.dat", plot_data("mean SNR per spreading factor", "sf", "snr_db", &sf(|s| s.mean_snr_db))),
        ("rssi_vs_channel.dat", plot_data("mean RSSI per channel", "frequency_mhz", "rssi_dbm", &ch(|s| s.mean_rssi_dbm))),
        ("snr_vs_channel.dat", plot_data("mean SNR per channel", "frequency_mhz", "snr_db", &ch(|s| s.mean_snr_db))),
    ]
}

/// Histogram of release errors in bins of `bin_ms`, keyed by bin centre.
pub fn jitter_histogram(errors_ms: &[f64], bin_ms: f64) -> String {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for e in errors_ms {
        *bins.entry((e / bin_ms).floor() as i64).or_default() += 1;
    }
    let points: Vec<(String, String)> =
        bins.into_iter().map(|(b, n)| (fixed3((b as f64 + 0.5) * bin_ms), n.to_string())).collect();
    plot_data("release error histogram", "release_error_ms", "count", &points)
}

/// PRR laid out as a 2x2 table: rows vary / keep SF, columns vary / keep
/// channel. `cells` are in row-major order.
pub fn prr_matrix(cells: &[MetricsReport; 4]) -> String {
    let mut s = String::from("# PRR by test case\n# rows: varying SF, same SF; columns: varying CH, same CH\n");
    for (title, pick) in [
        ("without deadlines", (|m: &MetricsReport| m.prr) as fn(&MetricsReport) -> f64),
        ("with deadlines", |m: &MetricsReport| m.prr_with_deadlines),
    ] {
        s.push_str(&format!("# {title}\n"));
        for row in cells.chunks(2) {
            s.push_str(&format!("{} {}\n", ratio(pick(&row[0])), ratio(pick(&row[1]))));
        }
    }
    s
}

/// Gateway-log view: receptions per frequency and data rate.
pub fn rxpk_csv(packets: &[RxPk]) -> Result<String, CliError> {
    let mut groups: BTreeMap<(u64, u8, u32), (usize, f64, f64)> = BTreeMap::new();
    for p in packets {
        let g = groups.entry((p.freq_hz, p.spreading_factor, p.bandwidth.hz())).or_insert((0, 0.0, 0.0));
        g.0 += 1;
        g.1 += f64::from(p.rssi_dbm);
        g.2 += p.lsnr_db;
    }
    let rows: Vec<Vec<String>> = groups
        .into_iter()
        .map(|((freq, sf, bw), (n, rssi, snr))| {
            vec![
                mhz(freq),
                sf.to_string(),
                (bw / 1000).to_string(),
                n.to_string(),
                fixed3(rssi / n as f64),
                fixed3(snr / n as f64),
            ]
        })
        .collect();
    csv_text(["frequency_mhz", "sf", "bandwidth_khz", "receptions", "mean_rssi_dbm", "mean_lsnr_db"], &rows)
}
