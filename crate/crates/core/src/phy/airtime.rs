use super::{PhyError, RadioConfig};
use crate::time::SimTime;

/// Largest payload an SX126x accepts in one packet.
pub const MAX_PAYLOAD_LEN: usize = 255;

/// Symbol duration `2^SF / BW` in microseconds. Exact for all legal
/// SF/bandwidth pairs.
pub fn symbol_time_us(cfg: &RadioConfig) -> u64 {
    (1u64 << cfg.spreading_factor) * 1_000_000 / u64::from(cfg.bandwidth.hz())
}

/// Low data rate optimization is mandatory once a symbol lasts longer than 16 ms.
pub fn uses_low_data_rate_optimize(cfg: &RadioConfig) -> bool {
    symbol_time_us(cfg) > 16_000
}

/// Exact airtime of one frame.
///
/// ```text
/// n_payload = 8 + max(ceil((8PL - 4SF + 28 + 16CRC - 20IH) / (4(SF - 2DE))) * (CR + 4), 0)
/// ToA       = (n_preamble + 4.25) * T_sym + n_payload * T_sym
/// ```
///
/// Every term is an integer number of quarter symbols and a symbol is a
/// multiple of 256 us, so the result is exact in microseconds.
pub fn airtime(cfg: &RadioConfig, payload_len: usize) -> Result<SimTime, PhyError> {
    if payload_len > MAX_PAYLOAD_LEN {
        return Err(PhyError::PayloadTooLong { len: payload_len, max: MAX_PAYLOAD_LEN });
    }
    cfg.validate(None)?;

    let sf = i64::from(cfg.spreading_factor);
    let de = i64::from(uses_low_data_rate_optimize(cfg));
    let crc = i64::from(cfg.crc_enabled);
    let implicit = i64::from(!cfg.explicit_header);

    let numerator = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * implicit;
    let denominator = 4 * (sf - 2 * de);
    let blocks = if numerator <= 0 { 0 } else { (numerator + denominator - 1) / denominator };
    let payload_symbols = 8 + blocks as u64 * (u64::from(cfg.coding_rate) + 4);

    let t_sym = symbol_time_us(cfg);
    let preamble_us = (4 * u64::from(cfg.preamble_symbols) + 17) * t_sym / 4;
    Ok(SimTime::from_us(preamble_us + payload_symbols * t_sym))
}

/// Airtime in milliseconds.
pub fn time_on_air(cfg: &RadioConfig, payload_len: usize) -> Result<f64, PhyError> {
    airtime(cfg, payload_len).map(SimTime::as_ms)
}

/// Transmit watchdog: 5 ms plus five times the expected airtime.
pub fn tx_timeout(toa_ms: f64) -> f64 {
    5.0 + 5.0 * toa_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::Bandwidth;
    use proptest::prelude::*;

    fn cfg(sf: u8) -> RadioConfig {
        RadioConfig::default().with_spreading_factor(sf)
    }

    #[test]
    fn sf7_reference_frame() {
        assert_eq!(airtime(&cfg(7), 21).unwrap(), SimTime::from_us(70_912));
        assert_eq!(time_on_air(&cfg(7), 21).unwrap(), 70.912);
    }

    #[test]
    fn sf12_reference_frame_uses_de() {
        assert!(uses_low_data_rate_optimize(&cfg(12)));
        assert_eq!(time_on_air(&cfg(12), 21).unwrap(), 1810.432);
    }

    #[test]
    fn payload_symbols_clamp_at_eight() {
        let c = RadioConfig { crc_enabled: false, explicit_header: false, ..cfg(12) };
        let t_sym = symbol_time_us(&c);
        assert_eq!(airtime(&c, 1).unwrap().as_us(), (12 * t_sym + t_sym / 4) + 8 * t_sym);
    }

    #[test]
    fn payload_too_long_is_rejected() {
        assert_eq!(
            airtime(&cfg(7), 256),
            Err(PhyError::PayloadTooLong { len: 256, max: 255 })
        );
        assert!(airtime(&cfg(7), 255).is_ok());
    }

    #[test]
    fn de_switches_on_only_past_16ms_symbols() {
        for sf in 7..=12u8 {
            for bw in Bandwidth::ALL {
                let c = RadioConfig { bandwidth: bw, ..cfg(sf) };
                let sym_ms = (1u64 << sf) as f64 / bw.hz() as f64 * 1e3;
                assert_eq!(uses_low_data_rate_optimize(&c), sym_ms > 16.0, "SF{sf} {bw}");
            }
        }
        assert!(uses_low_data_rate_optimize(&cfg(11)));
        assert!(!uses_low_data_rate_optimize(&cfg(10)));
    }

    #[test]
    fn timeout_rule() {
        assert!((tx_timeout(70.912) - 359.56).abs() < 1e-9);
        assert_eq!(tx_timeout(1.0), 10.0);
        assert!((tx_timeout(1810.432) - 9057.16).abs() < 1e-9);
    }

    fn arb_cfg() -> impl Strategy<Value = RadioConfig> {
        (7u8..=12, 0usize..3, 1u8..=4, 1u16..=16, any::<bool>(), any::<bool>()).prop_map(
            |(sf, bw, cr, pre, crc, explicit)| RadioConfig {
                spreading_factor: sf,
                bandwidth: Bandwidth::ALL[bw],
                coding_rate: cr,
                preamble_symbols: pre,
                crc_enabled: crc,
                explicit_header: explicit,
                ..RadioConfig::default()
            },
        )
    }

    proptest! {
        #[test]
        fn monotone_in_payload(c in arb_cfg(), pl in 0usize..255) {
            prop_assert!(airtime(&c, pl + 1).unwrap() >= airtime(&c, pl).unwrap());
            prop_assert!(airtime(&c, pl).unwrap() > SimTime::ZERO);
        }

        #[test]
        fn strictly_increasing_in_sf_at_125k(c in arb_cfg(), pl in 0usize..=255, sf in 7u8..12) {
            let base = RadioConfig { bandwidth: Bandwidth::Khz125, ..c };
            let lo = airtime(&base.with_spreading_factor(sf), pl).unwrap();
            let hi = airtime(&base.with_spreading_factor(sf + 1), pl).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn payload_part_is_whole_symbols(c in arb_cfg(), pl in 0usize..=255) {
            let t_sym = symbol_time_us(&c);
            let preamble = (4 * u64::from(c.preamble_symbols) + 17) * t_sym / 4;
            let rest = airtime(&c, pl).unwrap().as_us() - preamble;
            prop_assert_eq!(rest % t_sym, 0);
        }
    }
}
