//! Exact rational scalars and their textual forms.
//!
//! Every quantity in the crate (turning ratios, flows, matrix entries) is a
//! [`Rational`]. Text input accepts integers, fractions (`"7/3"`) and finite
//! decimals (`"0.25"`, `"-1.5e-2"`); all of them convert exactly.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

fn parse_err(literal: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        literal: literal.to_string(),
        reason,
    }
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn frac(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"3"`, `"-7/3"`, `"0.25"` or `"2.5e-1"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(parse_err(text, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_integer(num.trim()).ok_or_else(|| parse_err(text, "bad numerator"))?;
        let d = parse_integer(den.trim()).ok_or_else(|| parse_err(text, "bad denominator"))?;
        if d.is_zero() {
            return Err(parse_err(text, "zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    parse_decimal(s).ok_or_else(|| parse_err(text, "not an integer, fraction or decimal"))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.trim_start_matches('+').parse().ok()
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].trim_start_matches('+').parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, unsigned) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, fractional) = unsigned.split_once('.').unwrap_or((unsigned, ""));
    if whole.is_empty() && fractional.is_empty() {
        return None;
    }
    if !whole.bytes().chain(fractional.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{whole}{fractional}").parse().ok()?;
    let scale = exponent - i32::try_from(fractional.len()).ok()?;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(digits);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Canonical text form: `"5"`, `"-7/3"`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Decimal rendering rounded half away from zero to `places` digits.
pub fn format_decimal(value: &Rational, places: usize) -> String {
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let scaled = value.abs() * scale;
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let rounded = (scaled + half).floor().to_integer();
    let mut digits = rounded.to_string();
    if places > 0 {
        if digits.len() <= places {
            digits = format!("{}{}", "0".repeat(places + 1 - digits.len()), digits);
        }
        digits.insert(digits.len() - places, '.');
    }
    if value.is_negative() && digits.bytes().any(|b| matches!(b, b'1'..=b'9')) {
        format!("-{digits}")
    } else {
        digits
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Display adaptor for a rational in canonical fraction form.
pub struct Frac<'a>(pub &'a Rational);

impl fmt::Display for Frac<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format_rational(self.0))
    }
}

/// Serde adaptor storing a rational as its canonical string. Deserialization
/// also accepts JSON numbers, read from their literal text.
pub mod serde_string {
    use super::*;
    use serde::de::{self, Deserializer};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let number: serde_json::Value = serde::Deserialize::deserialize(deserializer)?;
        from_json(&number).map_err(de::Error::custom)
    }

    pub(crate) fn from_json(value: &serde_json::Value) -> Result<Rational, String> {
        match value {
            serde_json::Value::String(s) => parse_rational(s).map_err(|e| e.to_string()),
            serde_json::Value::Number(n) => parse_rational(&n.to_string()).map_err(|e| e.to_string()),
            other => Err(format!("expected a number or a rational string, found {other}")),
        }
    }
}

/// Like [`serde_string`] for optional values.
pub mod serde_string_opt {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Rational>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => serializer.serialize_some(&format_rational(v)),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Rational>, D::Error> {
        let value: Option<serde_json::Value> = Option::deserialize(deserializer)?;
        match value {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(v) => super::serde_string::from_json(&v)
                .map(Some)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// Like [`serde_string`] for maps with rational values.
pub mod serde_string_map {
    use super::*;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, Rational>, serializer: S) -> Result<S::Ok, S::Error> {
        let mut out = serializer.serialize_map(Some(map.len()))?;
        for (k, v) in map {
            out.serialize_entry(k, &format_rational(v))?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<BTreeMap<String, Rational>, D::Error> {
        let raw: BTreeMap<String, serde_json::Value> = BTreeMap::deserialize(deserializer)?;
        raw.into_iter()
            .map(|(k, v)| {
                super::serde_string::from_json(&v)
                    .map(|r| (k, r))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

pub(crate) fn is_zero(value: &Rational) -> bool {
    value.is_zero()
}

pub(crate) fn zero() -> Rational {
    Rational::zero()
}

pub(crate) fn one() -> Rational {
    Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimals_convert_exactly() {
        assert_eq!(parse_rational("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_rational("0.1").unwrap(), frac(1, 10));
        assert_eq!(parse_rational("-1.5e-2").unwrap(), frac(-3, 200));
        assert_eq!(parse_rational("2E3").unwrap(), int(2000));
        assert_eq!(parse_rational(".5").unwrap(), frac(1, 2));
        assert_eq!(parse_rational("3.").unwrap(), int(3));
    }

    #[test]
    fn fractions_and_integers() {
        assert_eq!(parse_rational("7/3").unwrap(), frac(7, 3));
        assert_eq!(parse_rational(" -4/6 ").unwrap(), frac(-2, 3));
        assert_eq!(parse_rational("+12").unwrap(), int(12));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1/0", "a", "1/2/3", "1.2.3", "--1", "e5", "1/-"] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn decimal_display() {
        assert_eq!(format_decimal(&frac(2, 3), 3), "0.667");
        assert_eq!(format_decimal(&frac(-1, 8), 2), "-0.13");
        assert_eq!(format_decimal(&frac(-1, 1000), 2), "0.00");
        assert_eq!(format_decimal(&int(5), 0), "5");
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(n in -10_000i64..10_000, d in 1i64..500) {
            let value = frac(n, d);
            prop_assert_eq!(parse_rational(&format_rational(&value)).unwrap(), value);
        }
    }
}
