//! Exact mixture weights and token quantities.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A mixture weight stored as an exact rational.
///
/// Parsed from decimal strings (`"0.58"`), fractions (`"1/15"`) or percentages
/// (`"0.08%"`), so that `0.58 + 0.24 + 0.14 + 0.04` is exactly `1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(BigRational);

impl Weight {
    pub fn zero() -> Self {
        Weight(BigRational::zero())
    }

    pub fn one() -> Self {
        Weight(BigRational::one())
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Weight(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Weight(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `|self - other|` as a float.
    pub fn distance(&self, other: &Weight) -> f64 {
        (&self.0 - &other.0).abs().to_f64().unwrap_or(f64::INFINITY)
    }

    /// Exact product with a token count.
    pub fn of_tokens(&self, tokens: u64) -> BigRational {
        &self.0 * BigRational::from_integer(tokens.into())
    }

    /// Largest integer token count not exceeding `self * tokens`.
    pub fn floor_tokens(&self, tokens: u64) -> u64 {
        self.of_tokens(tokens).floor().to_integer().to_u64().unwrap_or(u64::MAX)
    }

    /// Parses a float through its shortest decimal representation, so `0.1`
    /// becomes exactly `1/10`.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::config(format!("weight {value} is not finite")));
        }
        format!("{value}").parse()
    }
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if all_digits.is_empty() { BigInt::zero() } else { all_digits.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::config(format!("invalid weight {s:?}"));
        if let Some((n, d)) = t.split_once('/') {
            let n = parse_decimal(n.trim()).ok_or_else(bad)?;
            let d = parse_decimal(d.trim()).ok_or_else(bad)?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Weight(n / d));
        }
        if let Some(p) = t.strip_suffix('%') {
            let p = parse_decimal(p.trim()).ok_or_else(bad)?;
            return Ok(Weight(p / BigRational::from_integer(100.into())));
        }
        parse_decimal(t).map(Weight).ok_or_else(bad)
    }
}

/// Exact decimal when the denominator divides a power of ten, `n/d` otherwise.
impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.0))
    }
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut denom = r.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = (r * BigRational::from_integer(num_traits::pow(BigInt::from(10), places))).to_integer();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (i, frac) = digits.split_at(digits.len() - places);
    format!("{}{i}.{frac}", if neg { "-" } else { "" })
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Weight> for &'a Weight {
    type Output = Weight;
    fn add(self, rhs: &Weight) -> Weight {
        Weight(&self.0 + &rhs.0)
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0 - rhs.0)
    }
}

impl Mul for Weight {
    type Output = Weight;
    fn mul(self, rhs: Weight) -> Weight {
        Weight(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Weight> for &'a Weight {
    type Output = Weight;
    fn mul(self, rhs: &Weight) -> Weight {
        Weight(&self.0 * &rhs.0)
    }
}

impl Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::zero(), Add::add)
    }
}

impl<'a> Sum<&'a Weight> for Weight {
    fn sum<I: Iterator<Item = &'a Weight>>(iter: I) -> Weight {
        iter.fold(Weight::zero(), |acc, w| &acc + w)
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightRepr {
    Text(String),
    Int(i64),
    Float(f64),
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parsed = match WeightRepr::deserialize(d)? {
            WeightRepr::Text(s) => s.parse(),
            WeightRepr::Int(i) => Ok(Weight::ratio(i, 1)),
            WeightRepr::Float(f) => Weight::from_f64(f),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

const SUFFIXES: [(char, u64); 4] = [
    ('K', 1_000),
    ('M', 1_000_000),
    ('B', 1_000_000_000),
    ('T', 1_000_000_000_000),
];

/// Parses a token count with an optional `K`/`M`/`B`/`T` suffix (`"1.3T"`, `"250B"`,
/// `"2_000"`). The value must be a whole number of tokens.
pub fn parse_tokens(text: &str) -> Result<u64> {
    let cleaned: String = text.trim().chars().filter(|c| *c != '_' && *c != ',').collect();
    let bad = || Error::config(format!("invalid token quantity {text:?}"));
    let (number, multiplier) = match cleaned.chars().last() {
        Some(c) if c.is_ascii_alphabetic() => {
            let upper = c.to_ascii_uppercase();
            let (_, m) = SUFFIXES.iter().find(|(s, _)| *s == upper).ok_or_else(bad)?;
            (&cleaned[..cleaned.len() - 1], *m)
        }
        _ => (cleaned.as_str(), 1),
    };
    let value = parse_decimal(number.trim()).ok_or_else(bad)? * BigRational::from_integer(multiplier.into());
    if value.is_negative() || !value.is_integer() {
        return Err(bad());
    }
    value.to_integer().to_u64().ok_or_else(bad)
}

/// Compact human form: `6T`, `1.3T`, `13.333B`, `2048`.
pub fn format_tokens(tokens: u64) -> String {
    for (suffix, m) in SUFFIXES.iter().rev() {
        if tokens >= *m {
            let v = tokens as f64 / *m as f64;
            let s = format!("{v:.3}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            return format!("{s}{suffix}");
        }
    }
    tokens.to_string()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub(crate) enum TokenRepr {
    Int(u64),
    Text(String),
}

impl TokenRepr {
    pub(crate) fn resolve(&self) -> Result<u64> {
        match self {
            TokenRepr::Int(v) => Ok(*v),
            TokenRepr::Text(s) => parse_tokens(s),
        }
    }
}
