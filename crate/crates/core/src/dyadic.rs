//! Exact non-negative dyadic rationals `n / 2^e`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    num: BigUint,
    exp: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic::default()
    }

    pub fn from_int(n: impl Into<BigUint>) -> Self {
        Dyadic { num: n.into(), exp: 0 }
    }

    /// `2^k` for any integer `k`.
    pub fn pow2(k: i64) -> Self {
        if k >= 0 {
            Dyadic { num: BigUint::from(1u32) << k as u64, exp: 0 }
        } else {
            Dyadic { num: BigUint::from(1u32), exp: (-k) as u32 }
        }
    }

    /// `n / 2^exp`, reduced.
    pub fn new(num: impl Into<BigUint>, exp: u32) -> Self {
        let mut d = Dyadic { num: num.into(), exp };
        d.reduce();
        d
    }

    fn reduce(&mut self) {
        if self.num == BigUint::ZERO {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0).min(self.exp as u64);
        self.num >>= tz;
        self.exp -= tz as u32;
    }

    pub fn is_zero(&self) -> bool {
        self.num == BigUint::ZERO
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    /// Multiplies by `2^k`.
    pub fn scale_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            let shift = (k as u64).min(self.exp as u64);
            let rest = k as u64 - shift;
            Dyadic::new(self.num.clone() << rest, self.exp - shift as u32)
        } else {
            Dyadic::new(self.num.clone(), self.exp + (-k) as u32)
        }
    }

    pub fn mul_int(&self, n: &BigUint) -> Self {
        Dyadic::new(&self.num * n, self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        let n: f64 = self.num.to_string().parse().unwrap_or(f64::INFINITY);
        n / 2f64.powi(self.exp as i32)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Add<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        let a = &self.num << (e - self.exp) as u64;
        let b = &rhs.num << (e - rhs.exp) as u64;
        Dyadic::new(a + b, e)
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + &b)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        let a = &self.num << (e - self.exp) as u64;
        let b = &other.num << (e - other.exp) as u64;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact decimal expansion: `n / 2^e = n * 5^e / 10^e`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            return write!(f, "{}", self.num);
        }
        let scaled = (&self.num * BigUint::from(5u32).pow(self.exp)).to_string();
        let e = self.exp as usize;
        let padded = format!("{:0>width$}", scaled, width = e + 1);
        let (int, frac) = padded.split_at(padded.len() - e);
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a finite binary fraction: {0:?}")]
pub struct ParseDyadicError(String);

impl FromStr for Dyadic {
    type Err = ParseDyadicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDyadicError(s.to_string());
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let frac = frac.trim_end_matches('0');
        let digits: BigUint = format!("{int}{frac}").parse().map_err(|_| err())?;
        let e = frac.len() as u32;
        let five = BigUint::from(5u32).pow(e);
        if &digits % &five != BigUint::ZERO {
            return Err(err());
        }
        Ok(Dyadic::new(digits / five, e))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a `BigUint` as a decimal string.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(n)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display() {
        assert_eq!(Dyadic::pow2(-1).to_string(), "0.5");
        assert_eq!((Dyadic::pow2(0) + Dyadic::pow2(-1)).to_string(), "1.5");
        assert_eq!(Dyadic::new(9u32, 3).to_string(), "1.125");
        assert_eq!(Dyadic::zero().to_string(), "0");
        assert_eq!(Dyadic::pow2(-10).to_string(), "0.0009765625");
        assert_eq!(Dyadic::from_int(12u32).to_string(), "12");
    }

    #[test]
    fn parse_rejects_non_dyadic() {
        assert!("0.1".parse::<Dyadic>().is_err());
        assert!("abc".parse::<Dyadic>().is_err());
        assert_eq!("1.1250".parse::<Dyadic>().unwrap(), Dyadic::new(9u32, 3));
    }

    #[test]
    fn ordering() {
        assert!(Dyadic::new(3u32, 1) > Dyadic::new(9u32, 3));
        assert_eq!(Dyadic::new(4u32, 2), Dyadic::from_int(1u32));
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(n in 0u64..1_000_000, e in 0u32..40) {
            let d = Dyadic::new(n, e);
            prop_assert_eq!(d.to_string().parse::<Dyadic>().unwrap(), d);
        }

        #[test]
        fn addition_matches_integer_scaling(a in 0u64..1_000_000, ea in 0u32..20, b in 0u64..1_000_000, eb in 0u32..20) {
            let sum = Dyadic::new(a, ea) + Dyadic::new(b, eb);
            let scaled = (a as u128) * (1u128 << (20 - ea)) + (b as u128) * (1u128 << (20 - eb));
            prop_assert_eq!(sum.scale_pow2(20), Dyadic::from_int(BigUint::from(scaled)));
        }
    }
}
