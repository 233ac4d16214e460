//! Integer money and exact rates. Nothing in a financial path touches `f64`
//! except at the config boundary, where rates are parsed once into parts per
//! million.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Amount in minor currency units (cents).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub fn from_dollars(dollars: i64) -> Self {
        Cents(dollars * 100)
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn max(self, other: Cents) -> Cents {
        Cents(self.0.max(other.0))
    }

    pub fn min(self, other: Cents) -> Cents {
        Cents(self.0.min(other.0))
    }

    /// `floor(self × rate)`, computed exactly.
    pub fn scale_floor(self, rate: Rate) -> Cents {
        let prod = self.0 as i128 * rate.ppm() as i128;
        Cents(prod.div_euclid(Rate::ONE_PPM as i128) as i64)
    }

    /// `floor(self × a × b)` with a single rounding step.
    pub fn scale2_floor(self, a: Rate, b: Rate) -> Cents {
        let prod = self.0 as i128 * a.ppm() as i128 * b.ppm() as i128;
        let denom = Rate::ONE_PPM as i128 * Rate::ONE_PPM as i128;
        Cents(prod.div_euclid(denom) as i64)
    }

    /// Amount left to the payee after a discount: `floor(self × (1 − discount))`.
    pub fn discounted(self, discount: Rate) -> Cents {
        self.scale_floor(discount.complement())
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let dollars = abs / 100;
        let cents = abs % 100;
        // thousands separators on the dollar part
        let digits = dollars.to_string();
        let mut grouped = String::with_capacity(digits.len() + digits.len() / 3);
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                grouped.push(',');
            }
            grouped.push(ch);
        }
        write!(f, "{sign}${grouped}.{cents:02}")
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl SubAssign for Cents {
    fn sub_assign(&mut self, rhs: Cents) {
        self.0 -= rhs.0;
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

impl<'a> Sum<&'a Cents> for Cents {
    fn sum<I: Iterator<Item = &'a Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

/// A fraction in `[0, 1]` held as parts per million.
///
/// In JSON it reads and writes as a plain decimal (`0.08`); the decimal is
/// rounded to the nearest ppm once on the way in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(u32);

impl Rate {
    pub const ONE_PPM: u32 = 1_000_000;
    pub const ZERO: Rate = Rate(0);
    pub const ONE: Rate = Rate(Self::ONE_PPM);

    pub fn from_ppm(ppm: u32) -> Option<Rate> {
        (ppm <= Self::ONE_PPM).then_some(Rate(ppm))
    }

    pub fn from_percent(pct: u32) -> Option<Rate> {
        Self::from_ppm(pct.checked_mul(10_000)?)
    }

    pub fn from_f64(x: f64) -> Option<Rate> {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return None;
        }
        Some(Rate((x * Self::ONE_PPM as f64).round() as u32))
    }

    pub fn ppm(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::ONE_PPM as f64
    }

    pub fn complement(self) -> Rate {
        Rate(Self::ONE_PPM - self.0)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.as_f64() * 100.0)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        Rate::from_f64(x).ok_or_else(|| serde::de::Error::custom(format!("rate {x} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_groups_thousands() {
        assert_eq!(Cents(900_000).to_string(), "$9,000.00");
        assert_eq!(Cents(9_200).to_string(), "$92.00");
        assert_eq!(Cents(-305).to_string(), "-$3.05");
        assert_eq!(Cents(5).to_string(), "$0.05");
    }

    #[test]
    fn discount_floors_in_bank_favor() {
        let eight = Rate::from_percent(8).unwrap();
        assert_eq!(Cents(10_000).discounted(eight), Cents(9_200));
        // 0.92 × 1 cent floors to 0
        assert_eq!(Cents(1).discounted(eight), Cents(0));
        assert_eq!(Cents(30_000).discounted(eight), Cents(27_600));
    }

    #[test]
    fn scale2_rounds_once() {
        let half = Rate::from_f64(0.5).unwrap();
        let d = Rate::from_percent(8).unwrap().complement();
        // 333 × 0.5 × 0.92 = 153.18 → 153
        assert_eq!(Cents(333).scale2_floor(half, d), Cents(153));
    }

    #[test]
    fn rate_json_round_trip() {
        let r: Rate = serde_json::from_str("0.08").unwrap();
        assert_eq!(r.ppm(), 80_000);
        assert_eq!(serde_json::to_string(&r).unwrap(), "0.08");
        assert!(serde_json::from_str::<Rate>("1.5").is_err());
    }
}
