//! Simulated time.
//!
//! The kernel keeps time as an integer count of microseconds so that airtimes
//! such as 70.912 ms are represented exactly and event ordering never depends
//! on floating-point comparison. Everything user-facing is reported in
//! milliseconds.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point (or span) of simulated global time, in microseconds.
///
/// Serialized as fractional milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_us(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Rounds to the nearest microsecond; negative input saturates at zero.
    pub fn from_ms_f64(ms: f64) -> Self {
        SimTime((ms * 1_000.0).round().max(0.0) as u64)
    }

    pub const fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    /// Signed difference `self - other` in milliseconds.
    pub fn signed_ms_since(self, other: SimTime) -> f64 {
        (self.0 as i128 - other.0 as i128) as f64 / 1_000.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03} ms", self.0 / 1_000, self.0 % 1_000)
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_ms())
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ms = f64::deserialize(deserializer)?;
        if !ms.is_finite() || ms < 0.0 {
            return Err(serde::de::Error::custom(format!("invalid time {ms} ms")));
        }
        Ok(SimTime::from_ms_f64(ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ms_roundtrip_through_json() {
        let t = SimTime::from_us(70_912);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "70.912");
        let back: SimTime = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn signed_difference() {
        assert_eq!(SimTime::from_ms(2).signed_ms_since(SimTime::from_ms(3)), -1.0);
        assert_eq!(format!("{}", SimTime::from_us(1_810_432)), "1810.432 ms");
    }
}
