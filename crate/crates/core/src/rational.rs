//! Exact rationals on 64-bit parts. Every operation is overflow-checked and
//! reports overflow as an error instead of wrapping or rounding.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("arithmetic overflow in exact rational computation")]
    Overflow,
    #[error("malformed rational '{0}'")]
    Malformed(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("probability {0} is not in (0, 1]")]
    NotAProbability(Rational),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self, RationalError> {
        if den == 0 {
            return Err(RationalError::DivisionByZero);
        }
        if num == i64::MIN || den == i64::MIN {
            return Err(RationalError::Overflow);
        }
        Ok(Rational(Ratio::new(num, den)))
    }

    pub fn zero() -> Self {
        Rational(Ratio::zero())
    }

    pub fn one() -> Self {
        Rational(Ratio::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(self, other: Self) -> Result<Self, RationalError> {
        self.0
            .checked_add(&other.0)
            .map(Rational)
            .ok_or(RationalError::Overflow)
    }

    pub fn sub(self, other: Self) -> Result<Self, RationalError> {
        self.0
            .checked_sub(&other.0)
            .map(Rational)
            .ok_or(RationalError::Overflow)
    }

    pub fn mul(self, other: Self) -> Result<Self, RationalError> {
        self.0
            .checked_mul(&other.0)
            .map(Rational)
            .ok_or(RationalError::Overflow)
    }

    pub fn div(self, other: Self) -> Result<Self, RationalError> {
        if other.is_zero() {
            return Err(RationalError::DivisionByZero);
        }
        self.0
            .checked_div(&other.0)
            .map(Rational)
            .ok_or(RationalError::Overflow)
    }

    pub fn pow(self, n: u32) -> Result<Self, RationalError> {
        let mut acc = Rational::one();
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn to_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn sum<I: IntoIterator<Item = Rational>>(items: I) -> Result<Self, RationalError> {
        items
            .into_iter()
            .try_fold(Rational::zero(), |acc, x| acc.add(x))
    }
}

/// Least common multiple of the given denominators, overflow-checked.
pub fn lcm_denominators<I: IntoIterator<Item = Rational>>(items: I) -> Result<i64, RationalError> {
    items.into_iter().try_fold(1i64, |acc, r| {
        let d = r.denom();
        let g = acc.gcd(&d);
        (acc / g).checked_mul(d).ok_or(RationalError::Overflow)
    })
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RationalError::Malformed(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: i64 = n.parse().map_err(|_| bad())?;
        let d: i64 = d.parse().map_err(|_| bad())?;
        Rational::new(n, d)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A rational in `(0, 1]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Rational", into = "Rational")]
pub struct Probability(Rational);

impl Probability {
    pub fn new(num: i64, den: i64) -> Result<Self, RationalError> {
        Probability::try_from(Rational::new(num, den)?)
    }

    pub fn one() -> Self {
        Probability(Rational::one())
    }

    pub fn value(self) -> Rational {
        self.0
    }
}

impl TryFrom<Rational> for Probability {
    type Error = RationalError;

    fn try_from(r: Rational) -> Result<Self, Self::Error> {
        if r > Rational::zero() && r <= Rational::one() {
            Ok(Probability(r))
        } else {
            Err(RationalError::NotAProbability(r))
        }
    }
}

impl From<Probability> for Rational {
    fn from(p: Probability) -> Rational {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes() {
        let r = Rational::new(6, 8).unwrap();
        assert_eq!((r.numer(), r.denom()), (3, 4));
        assert_eq!("3/4".parse::<Rational>().unwrap(), r);
        assert_eq!(r.to_string(), "3/4");
    }

    #[test]
    fn overflow_is_an_error() {
        let big = Rational::new(i64::MAX, 1).unwrap();
        assert_eq!(big.add(Rational::one()), Err(RationalError::Overflow));
        let tiny = Rational::new(1, 1 << 40).unwrap();
        assert_eq!(tiny.mul(tiny), Err(RationalError::Overflow));
    }

    #[test]
    fn probability_bounds() {
        assert!(Probability::new(1, 1).is_ok());
        assert!(Probability::new(0, 1).is_err());
        assert!(Probability::new(5, 4).is_err());
    }

    #[test]
    fn lcm() {
        let rs = ["1/2", "1/3", "2/3"].map(|s| s.parse::<Rational>().unwrap());
        assert_eq!(lcm_denominators(rs).unwrap(), 6);
    }
}
