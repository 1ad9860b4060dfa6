//! Serde adapters that encode big integers and rationals as decimal strings,
//! so JSON never truncates values to 64 bits.

use crate::arith::{Int, Rat};
use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

/// Parses a decimal integer string.
pub fn parse_int(s: &str) -> Result<Int, String> {
    s.trim().parse::<Int>().map_err(|e| format!("bad integer {s:?}: {e}"))
}

/// Parses `"n"` or `"n/d"` into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d == Int::from(0) {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rat::new(parse_int(n)?, d))
        }
        None => Ok(Rat::from_integer(parse_int(s)?)),
    }
}

/// Formats a rational as `"n"` or `"n/d"`.
pub fn fmt_rat(x: &Rat) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// A single integer as a string.
pub mod int_str {
    use super::*;
    /// Serializes.
    pub fn serialize<S: Serializer>(v: &Int, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }
    /// Deserializes.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Int, D::Error> {
        let s = String::deserialize(d)?;
        parse_int(&s).map_err(D::Error::custom)
    }
}

/// A vector of integers as strings.
pub mod int_vec {
    use super::*;
    /// Serializes.
    pub fn serialize<S: Serializer>(v: &[Int], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }
    /// Deserializes.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Int>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_int(s).map_err(D::Error::custom)).collect()
    }
}

/// A single rational as a string.
pub mod rat_str {
    use super::*;
    /// Serializes.
    pub fn serialize<S: Serializer>(v: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(v))
    }
    /// Deserializes.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(D::Error::custom)
    }
}

/// A vector of rationals as strings.
pub mod rat_vec {
    use super::*;
    /// Serializes.
    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_rat))
    }
    /// Deserializes.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_rat(s).map_err(D::Error::custom)).collect()
    }
}
