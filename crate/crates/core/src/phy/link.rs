use serde::{Deserialize, Serialize};

use super::{check_spreading_factor, PhyError};

/// Demodulation floors for SF7..=SF12, in dB, indexed by `sf - 7`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnrFloors(pub [f64; 6]);

impl Default for SnrFloors {
    fn default() -> Self {
        SnrFloors([-7.5, -10.0, -12.5, -15.0, -17.5, -20.0])
    }
}

impl SnrFloors {
    /// Panics if `sf` is outside 7..=12; callers validate first.
    pub fn floor_db(&self, sf: u8) -> f64 {
        self.0[usize::from(sf - 7)]
    }
}

/// Log-distance path loss with optional log-normal shadowing and a
/// per-SF demodulation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
    pub reference_distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub noise_floor_dbm: f64,
    pub snr_floor_db_by_sf: SnrFloors,
    pub capture_threshold_db: Option<f64>,
    /// Gain added to the SNR the gateway reports, per SF step above SF7.
    /// Demodulation decisions use the raw link SNR.
    pub reported_snr_gain_per_sf_db: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            path_loss_exponent: 2.7,
            reference_loss_db: 40.0,
            reference_distance_m: 1.0,
            shadowing_sigma_db: 2.0,
            noise_floor_dbm: -117.0,
            snr_floor_db_by_sf: SnrFloors::default(),
            capture_threshold_db: None,
            reported_snr_gain_per_sf_db: 2.5,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |msg: &str| Err(PhyError::InvalidLinkModel(msg.to_owned()));
        if !(self.reference_distance_m > 0.0) {
            return bad("reference_distance_m must be positive");
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return bad("shadowing_sigma_db must be non-negative");
        }
        if self.snr_floor_db_by_sf.0.windows(2).any(|w| w[1] >= w[0]) {
            return bad("snr floors must strictly decrease with SF");
        }
        if let Some(t) = self.capture_threshold_db {
            if !(t > 0.0) {
                return bad("capture threshold must be positive");
            }
        }
        Ok(())
    }

    /// SNR as written to the gateway log for a frame at `sf`.
    pub fn reported_snr_db(&self, snr_db: f64, sf: u8) -> f64 {
        snr_db + self.reported_snr_gain_per_sf_db * f64::from(sf.saturating_sub(7))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub rssi_dbm: f64,
    pub snr_db: f64,
}

pub fn link_budget(model: &LinkModel, tx_power_dbm: f64, distance_m: f64, shadow_draw_db: f64) -> LinkBudget {
    let path_loss = model.reference_loss_db
        + 10.0 * model.path_loss_exponent * (distance_m / model.reference_distance_m).log10();
    let rssi_dbm = tx_power_dbm - path_loss + shadow_draw_db;
    LinkBudget { rssi_dbm, snr_db: rssi_dbm - model.noise_floor_dbm }
}

/// True iff `snr_db` reaches the floor for `sf` (inclusive).
pub fn decodable(model: &LinkModel, snr_db: f64, sf: u8) -> Result<bool, PhyError> {
    check_spreading_factor(sf)?;
    Ok(snr_db >= model.snr_floor_db_by_sf.floor_db(sf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat() -> LinkModel {
        LinkModel { reference_loss_db: 80.0, path_loss_exponent: 2.0, ..LinkModel::default() }
    }

    #[test]
    fn budget_at_reference_distance() {
        let b = link_budget(&flat(), 0.0, 1.0, 0.0);
        assert_eq!(b.rssi_dbm, -80.0);
    }

    #[test]
    fn budget_one_decade_out() {
        let b = link_budget(&flat(), 0.0, 10.0, 0.0);
        assert!((b.rssi_dbm + 100.0).abs() < 1e-12);
    }

    #[test]
    fn snr_is_rssi_over_noise() {
        let m = LinkModel { noise_floor_dbm: -117.0, ..flat() };
        // Shadow draw chosen so rssi lands at -84 dBm.
        let b = link_budget(&m, 0.0, 1.0, -4.0);
        assert_eq!(b.rssi_dbm, -84.0);
        assert_eq!(b.snr_db, 33.0);
    }

    #[test]
    fn floors() {
        let m = LinkModel::default();
        assert_eq!(decodable(&m, -8.0, 7), Ok(false));
        assert_eq!(decodable(&m, -8.0, 8), Ok(true));
        assert_eq!(decodable(&m, -12.5, 9), Ok(true));
        assert!(decodable(&m, 0.0, 6).is_err());
    }

    #[test]
    fn validation() {
        assert!(LinkModel::default().validate().is_ok());
        let m = LinkModel {
            snr_floor_db_by_sf: SnrFloors([-7.5, -7.5, -12.5, -15.0, -17.5, -20.0]),
            ..LinkModel::default()
        };
        assert!(m.validate().is_err());
        let m = LinkModel { reference_distance_m: 0.0, ..LinkModel::default() };
        assert!(m.validate().is_err());
        let m = LinkModel { capture_threshold_db: Some(0.0), ..LinkModel::default() };
        assert!(m.validate().is_err());
    }

    #[test]
    fn reported_snr_rises_with_sf() {
        let m = LinkModel::default();
        assert_eq!(m.reported_snr_db(10.0, 7), 10.0);
        assert_eq!(m.reported_snr_db(10.0, 9), 15.0);
    }

    proptest! {
        #[test]
        fn decodable_is_monotone(snr in -40.0f64..40.0, bump in 0.0f64..20.0, sf in 7u8..=12) {
            let m = LinkModel::default();
            if decodable(&m, snr, sf).unwrap() {
                prop_assert!(decodable(&m, snr + bump, sf).unwrap());
            }
        }
    }
}
