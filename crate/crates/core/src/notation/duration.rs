use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// Denominators a note duration may carry, in quarter lengths.
pub const SUPPORTED_DENOMINATORS: [i64; 8] = [1, 2, 3, 4, 6, 8, 12, 16];

/// Largest numerator or denominator accepted from an explicit `{p/q}` literal.
pub(crate) const MAX_LITERAL: i64 = 1 << 20;

/// An exact, positive note length measured in quarter notes.
///
/// The ratio is always reduced and its denominator is one of
/// [`SUPPORTED_DENOMINATORS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Duration(Rational64);

impl Duration {
    pub const QUARTER: Duration = Duration(Rational64::new_raw(1, 1));

    pub fn new(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Duration("zero denominator".into()));
        }
        Self::from_ratio(Rational64::new(numer, denom))
    }

    pub fn from_ratio(r: Rational64) -> Result<Self> {
        if r <= Rational64::from_integer(0) {
            return Err(Error::Duration(format!("{r} is not positive")));
        }
        if !SUPPORTED_DENOMINATORS.contains(r.denom()) {
            return Err(Error::Duration(format!(
                "{r} has unsupported denominator {}",
                r.denom()
            )));
        }
        Ok(Duration(r))
    }

    pub fn whole_quarters(n: i64) -> Result<Self> {
        Self::new(n, 1)
    }

    pub fn ratio(&self) -> Rational64 {
        self.0
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Multiplies by an exact fraction, failing when the result leaves the
    /// supported denominator set.
    pub fn scaled(&self, factor: Rational64) -> Result<Self> {
        Self::from_ratio(self.0 * factor)
    }

    /// Quarter-length text used inside note tokens: a terminating decimal
    /// when one exists (`1`, `0.5`, `0.75`), otherwise `p/q`.
    pub fn token_text(&self) -> String {
        decimal_text(self.0).unwrap_or_else(|| format!("{}/{}", self.numer(), self.denom()))
    }
}

impl Add for Duration {
    type Output = Rational64;

    fn add(self, rhs: Self) -> Rational64 {
        self.0 + rhs.0
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl<'a> Sum<&'a Duration> for Rational64 {
    fn sum<I: Iterator<Item = &'a Duration>>(iter: I) -> Self {
        iter.fold(Rational64::from_integer(0), |acc, d| acc + d.0)
    }
}

/// Renders a non-negative ratio as a terminating decimal, or `None` when the
/// denominator has prime factors other than 2 and 5.
pub fn decimal_text(r: Rational64) -> Option<String> {
    let mut den = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return None;
    }
    let places = twos.max(fives);
    let scale = 10i128.pow(places);
    let scaled = *r.numer() as i128 * scale / *r.denom() as i128;
    let int_part = scaled / scale;
    let frac_part = scaled % scale;
    if places == 0 {
        return Some(int_part.to_string());
    }
    let frac = format!("{:0width$}", frac_part, width = places as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        Some(int_part.to_string())
    } else {
        Some(format!("{int_part}.{frac}"))
    }
}
