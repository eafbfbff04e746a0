//! Exact simulation time in non-negative rational ticks.

use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_rational::Ratio;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(Ratio<u64>);

impl SimTime {
    pub const ZERO: SimTime = SimTime(Ratio::new_raw(0, 1));

    pub fn from_ticks(ticks: u64) -> Self {
        SimTime(Ratio::from_integer(ticks))
    }

    /// `numer / denom` ticks. Panics if `denom` is zero.
    pub fn from_ratio(numer: u64, denom: u64) -> Self {
        SimTime(Ratio::new(numer, denom))
    }

    /// Nearest rational with denominator at most 10^6.
    pub fn from_f64(t: f64) -> Option<Self> {
        if !t.is_finite() || t < 0.0 || t > u32::MAX as f64 {
            return None;
        }
        const SCALE: f64 = 1_000_000.0;
        Some(SimTime(Ratio::new(
            (t * SCALE).round() as u64,
            SCALE as u64,
        )))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// `self * numer / denom`. Panics if `denom` is zero.
    pub fn scaled(self, numer: u64, denom: u64) -> Self {
        SimTime(self.0 * Ratio::new(numer, denom))
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Exact decimal (`1.1095`) when the value has a terminating expansion,
    /// otherwise `numer/denom`.
    pub fn exact_decimal(&self) -> String {
        let (n, d) = (self.numer(), self.denom());
        let mut rest = d;
        let (mut twos, mut fives) = (0u32, 0u32);
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        if rest != 1 || twos.max(fives) > 18 {
            return self.to_string();
        }
        let digits = twos.max(fives);
        if digits == 0 {
            return n.to_string();
        }
        let scaled = n as u128 * 10u128.pow(digits) / d as u128;
        let unit = 10u128.pow(digits);
        format!(
            "{}.{:0width$}",
            scaled / unit,
            scaled % unit,
            width = digits as usize
        )
    }

    /// Fixed one-decimal rendering, rounded half up: `15` → `15.0`.
    pub fn one_decimal(&self) -> String {
        let tenths =
            (self.numer() as u128 * 10 * 2 + self.denom() as u128) / (2 * self.denom() as u128);
        format!("{}.{}", tenths / 10, tenths % 10)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;

    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl From<u64> for SimTime {
    fn from(t: u64) -> Self {
        SimTime::from_ticks(t)
    }
}

/// Integers print bare (`5`); other values as `numer/denom`.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for SimTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| format!("bad time `{s}`"))?;
            let d: u64 = d.trim().parse().map_err(|_| format!("bad time `{s}`"))?;
            if d == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(SimTime::from_ratio(n, d));
        }
        if let Ok(n) = s.parse::<u64>() {
            return Ok(SimTime::from_ticks(n));
        }
        s.parse::<f64>()
            .ok()
            .and_then(SimTime::from_f64)
            .ok_or_else(|| format!("bad time `{s}`"))
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_u64(self.numer())
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct TimeVisitor;

        impl Visitor<'_> for TimeVisitor {
            type Value = SimTime;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number of ticks or a `n/d` string")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<SimTime, E> {
                Ok(SimTime::from_ticks(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<SimTime, E> {
                u64::try_from(v)
                    .map(SimTime::from_ticks)
                    .map_err(|_| E::custom("negative time"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<SimTime, E> {
                SimTime::from_f64(v).ok_or_else(|| E::custom(format!("bad time {v}")))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<SimTime, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(TimeVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering() {
        assert_eq!(SimTime::from_ticks(15).one_decimal(), "15.0");
        assert_eq!(SimTime::ZERO.one_decimal(), "0.0");
        assert_eq!(SimTime::from_ratio(5, 2).one_decimal(), "2.5");
        assert_eq!(SimTime::from_ratio(1, 3).one_decimal(), "0.3");
        assert_eq!(SimTime::from_ratio(2, 3).one_decimal(), "0.7");
        assert_eq!(SimTime::from_ticks(5).to_string(), "5");
        assert_eq!(SimTime::from_ratio(5, 2).to_string(), "5/2");
        assert_eq!(SimTime::from_ratio(2219, 2000).exact_decimal(), "1.1095");
        assert_eq!(SimTime::from_ratio(1, 40).exact_decimal(), "0.025");
        assert_eq!(SimTime::from_ticks(12).exact_decimal(), "12");
        assert_eq!(SimTime::from_ratio(1, 3).exact_decimal(), "1/3");
        assert_eq!(
            SimTime::from_ratio(1, 1 << 40).exact_decimal(),
            "1/1099511627776"
        );
    }

    #[test]
    fn parsing() {
        assert_eq!("5/2".parse::<SimTime>().unwrap(), SimTime::from_ratio(5, 2));
        assert_eq!("2.5".parse::<SimTime>().unwrap(), SimTime::from_ratio(5, 2));
        assert_eq!("7".parse::<SimTime>().unwrap(), SimTime::from_ticks(7));
        assert!("-1".parse::<SimTime>().is_err());
        assert!("1/0".parse::<SimTime>().is_err());
        let t: SimTime = serde_json::from_str("0.25").unwrap();
        assert_eq!(t, SimTime::from_ratio(1, 4));
        let t: SimTime = serde_json::from_str("\"1/3\"").unwrap();
        assert_eq!(t, SimTime::from_ratio(1, 3));
    }

    #[test]
    fn ordering_and_arithmetic() {
        let a = SimTime::from_ratio(1, 2);
        assert!(a < SimTime::from_ticks(1));
        assert_eq!(a + a, SimTime::from_ticks(1));
        assert_eq!(SimTime::from_ticks(5) * 3, SimTime::from_ticks(15));
    }
}
