//! Noise levels that may lie far below the smallest positive `f64`.
//!
//! An [`Epsilon`] is either an ordinary decimal value or an exact power of
//! two `2^e`. The power-of-two form is only ever handled through its
//! exponent, so values such as `2^-4096` can drive counting and entropy
//! computations without underflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Value(f64),
    /// `2^exponent`.
    Pow2(f64),
}

impl Epsilon {
    pub fn value(v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive and finite, got {v}")));
        }
        Ok(Epsilon::Value(v))
    }

    pub fn pow2(exponent: f64) -> Result<Self> {
        if !exponent.is_finite() {
            return Err(Error::Domain(format!("epsilon exponent must be finite, got {exponent}")));
        }
        Ok(Epsilon::Pow2(exponent))
    }

    pub fn log2(&self) -> f64 {
        match *self {
            Epsilon::Value(v) => v.log2(),
            Epsilon::Pow2(e) => e,
        }
    }

    pub fn ln(&self) -> f64 {
        match *self {
            Epsilon::Value(v) => v.ln(),
            Epsilon::Pow2(e) => e * std::f64::consts::LN_2,
        }
    }

    /// `log2(1/ε)`.
    pub fn bits(&self) -> f64 {
        -self.log2()
    }

    /// Linear value; `None` when the exponent form is not representable as a normal `f64`.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Epsilon::Value(v) => Some(v),
            Epsilon::Pow2(e) => {
                let v = e.exp2();
                (v.is_normal()).then_some(v)
            }
        }
    }

    /// `ε / 2^shift` in the same representation.
    pub fn div_pow2(&self, shift: i32) -> Self {
        match *self {
            Epsilon::Value(v) => Epsilon::Value(v / f64::from(shift).exp2()),
            Epsilon::Pow2(e) => Epsilon::Pow2(e - f64::from(shift)),
        }
    }

    /// Is `λ ≥ ε`, given `λ` and its base-2 logarithm?
    pub(crate) fn covered_by(&self, lambda: f64, log2_lambda: f64) -> bool {
        match *self {
            Epsilon::Value(v) => lambda >= v,
            Epsilon::Pow2(e) => log2_lambda >= e,
        }
    }

    /// `log2(λ/ε)`.
    pub(crate) fn log2_ratio(&self, lambda: f64, log2_lambda: f64) -> f64 {
        match *self {
            Epsilon::Value(v) if lambda > 0.0 => (lambda / v).log2(),
            _ => log2_lambda - self.log2(),
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Epsilon::Value(v) => write!(f, "{}", crate::format::float(v)),
            Epsilon::Pow2(e) => write!(f, "pow2:{e}"),
        }
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    /// Accepts a decimal (`0.1`, `1e-3`) or `pow2:-N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(exp) = s.strip_prefix("pow2:") {
            let e: f64 = exp
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad pow2 exponent in {s:?}")))?;
            Epsilon::pow2(e)
        } else {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Validation(format!("bad epsilon {s:?}")))?;
            Epsilon::value(v)
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Epsilon::Value(v) => serializer.serialize_f64(v),
            Epsilon::Pow2(_) => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Epsilon::value(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        assert_eq!("0.1".parse::<Epsilon>().unwrap(), Epsilon::Value(0.1));
        assert_eq!("pow2:-1024".parse::<Epsilon>().unwrap(), Epsilon::Pow2(-1024.0));
        assert!("pow2:x".parse::<Epsilon>().is_err());
        assert!("-1".parse::<Epsilon>().is_err());
        assert!("0".parse::<Epsilon>().is_err());
    }

    #[test]
    fn quarter_keeps_representation() {
        assert_eq!(Epsilon::Value(0.1).div_pow2(2), Epsilon::Value(0.025));
        assert_eq!(Epsilon::Pow2(-10.0).div_pow2(2), Epsilon::Pow2(-12.0));
    }

    #[test]
    fn tiny_exponent_has_no_linear_value() {
        assert_eq!(Epsilon::Pow2(-4096.0).as_f64(), None);
        assert_eq!(Epsilon::Pow2(-3.0).as_f64(), Some(0.125));
        assert_eq!(Epsilon::Pow2(-4096.0).bits(), 4096.0);
    }

    #[test]
    fn json_round_trip() {
        let v = vec![Epsilon::Value(1e-3), Epsilon::Pow2(-64.0)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[0.001,"pow2:-64"]"#);
        let back: Vec<Epsilon> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
