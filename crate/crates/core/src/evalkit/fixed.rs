use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A decimal with exactly two fractional digits, stored as hundredths.
///
/// Rounding is half-up on magnitude, so halves move away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed2(i64);

impl Fixed2 {
    pub const ZERO: Fixed2 = Fixed2(0);
    pub const HUNDRED: Fixed2 = Fixed2(10_000);

    pub const fn from_hundredths(h: i64) -> Self {
        Fixed2(h)
    }

    pub fn hundredths(self) -> i64 {
        self.0
    }

    /// `num / den` rounded to two decimals.
    pub fn from_ratio(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let scaled = num * 100;
        let (q, r) = (scaled / den, scaled % den);
        let bump = if 2 * r.abs() >= den { r.signum() } else { 0 };
        Fixed2((q + bump) as i64)
    }

    /// `100 * num / den` rounded to two decimals.
    pub fn percent(num: i128, den: i128) -> Self {
        Self::from_ratio(num * 100, den)
    }

    pub fn from_rational(value: &BigRational) -> Self {
        let scaled = value * BigRational::from_integer(BigInt::from(100));
        let (q, r) = scaled.numer().div_rem(scaled.denom());
        let twice = (r.abs() * 2u32).cmp(scaled.denom());
        let mut h = q;
        if twice != std::cmp::Ordering::Less && !r.is_zero() {
            h += if scaled.is_negative() { -1 } else { 1 };
        }
        Fixed2(h.to_i64().expect("value fits in i64 hundredths"))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Fixed2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

impl Serialize for Fixed2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Fixed2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Ok(Fixed2((v * 100.0).round() as i64))
    }
}
