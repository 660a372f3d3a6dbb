//! Exact rationals for rates, latencies and objectives.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive};

pub type Ratio = Rational64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as an exact number")]
pub struct ParseRatioError(pub String);

/// Parses `"12"`, `"0.0858"`, `"-1.5"` or `"3/4"` without going through floats.
pub fn parse_ratio(s: &str) -> Result<Ratio, ParseRatioError> {
    let err = || ParseRatioError(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 15
    {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let num: i64 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| err())?
    };
    let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(err)?;
    let r = Ratio::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Decimal string when the expansion terminates, `a/b` otherwise.
pub fn format_ratio(r: &Ratio) -> String {
    let mut d = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    if places == 0 {
        return r.numer().to_string();
    }
    let scale = 10i128.pow(places);
    let scaled = (*r.numer() as i128) * scale / (*r.denom() as i128);
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = scaled.abs();
    let int = abs / scale;
    let frac = abs % scale;
    let frac = format!("{:0width$}", frac, width = places as usize);
    format!("{sign}{int}.{}", frac.trim_end_matches('0'))
}

pub fn to_f64(r: &Ratio) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn ceil_int(r: &Ratio) -> i64 {
    r.ceil().to_integer()
}

pub fn floor_int(r: &Ratio) -> i64 {
    r.floor().to_integer()
}

/// Closest rational with denominator dividing `den`; for reading LP values
/// that are known to be multiples of `1/den`.
pub fn snap(x: f64, den: i64) -> Ratio {
    Ratio::new((x * den as f64).round() as i64, den)
}
