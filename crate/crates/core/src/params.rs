use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("cannot parse {0:?} as a rational (use a decimal like 0.25 or a fraction like 1/4)")]
    Unparsable(String),
    #[error("epsilon = {value} must lie in the open interval (0, {upper})")]
    EpsilonOutOfRange { value: String, upper: String },
}

/// An exact accuracy parameter in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epsilon(Ratio<u64>);

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Self, ParamError> {
        if den == 0 {
            return Err(ParamError::Unparsable(format!("{num}/{den}")));
        }
        Self::from_ratio(Ratio::new(num, den))
    }

    pub fn from_ratio(r: Ratio<u64>) -> Result<Self, ParamError> {
        if *r.numer() == 0 || r >= Ratio::from_integer(1) {
            return Err(ParamError::EpsilonOutOfRange {
                value: r.to_string(),
                upper: "1".into(),
            });
        }
        Ok(Self(r))
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Rejects values at or above `upper`.
    pub fn ensure_below(&self, upper: Ratio<u64>) -> Result<(), ParamError> {
        if self.0 >= upper {
            Err(ParamError::EpsilonOutOfRange {
                value: self.0.to_string(),
                upper: upper.to_string(),
            })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses `0.25`, `.25` or `1/4` exactly.
pub fn parse_rational(s: &str) -> Result<Ratio<u64>, ParamError> {
    let bad = || ParamError::Unparsable(s.to_string());
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: u64 = num.trim().parse().map_err(|_| bad())?;
        let den: u64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Ratio::new(num, den))
}

impl FromStr for Epsilon {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_ratio(parse_rational(s)?)
    }
}
