//! Exact rationals and the ordered ring of affine polynomials `a + b*M`.
//!
//! A [`BigM`] stands for the value a quantity takes once the formal parameter
//! `M` is large enough that every comparison in a computation has settled.
//! Comparison is lexicographic on `(slope, constant)`, which is exactly the
//! order of `a + b*M0` for all sufficiently large real `M0`.
//!
//! Plain numeric values are `BigM`s with slope zero; there is no separate
//! numeric code path.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number, always stored in lowest terms with positive denominator.
pub type Rational = BigRational;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseScalarError {
    #[error("empty scalar literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    InvalidRational(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Builds a rational from an integer.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Builds the rational `n / d`. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `n`, `-n`, `n/d`, or a plain decimal such as `1.25`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseScalarError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(ParseScalarError::Empty);
    }
    let bad = || ParseScalarError::InvalidRational(t.to_string());
    if let Some((num, den)) = t.split_once('/') {
        let n = parse_integer(num).ok_or_else(bad)?;
        if den.starts_with(['+', '-']) {
            return Err(bad());
        }
        let d = parse_integer(den).ok_or_else(bad)?;
        if d.is_zero() {
            return Err(ParseScalarError::ZeroDenominator(t.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['+', '-']);
        if whole.len() - whole_digits.len() > 1 {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let magnitude = parse_integer(&digits).ok_or_else(bad)?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let value = Rational::new(magnitude, scale);
        return Ok(if negative { -value } else { value });
    }
    parse_integer(t).map(Rational::from_integer).ok_or_else(bad)
}

fn parse_integer(text: &str) -> Option<BigInt> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Renders a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders a rational as a decimal with exactly `places` fractional digits,
/// rounding half away from zero.
pub fn format_decimal(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = r.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let negative = r.is_negative() && !rounded.is_zero();
    let (whole, frac) = num_integer::Integer::div_rem(&rounded, &scale);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{:0>places$}", frac.to_string())
    }
}

/// The affine polynomial `constant + slope * M`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BigM {
    constant: Rational,
    slope: Rational,
}

impl BigM {
    pub fn new(constant: Rational, slope: Rational) -> Self {
        BigM { constant, slope }
    }

    /// A value with no dependence on `M`.
    pub fn constant(value: Rational) -> Self {
        BigM { constant: value, slope: Rational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::constant(int(n))
    }

    /// The parameter itself, `0 + 1*M`.
    pub fn m() -> Self {
        BigM { constant: Rational::zero(), slope: Rational::one() }
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub fn slope(&self) -> &Rational {
        &self.slope
    }

    pub fn is_numeric(&self) -> bool {
        self.slope.is_zero()
    }

    /// Multiplies both parts by a rational.
    pub fn scale(&self, c: &Rational) -> Self {
        BigM { constant: &self.constant * c, slope: &self.slope * c }
    }

    /// Substitutes `M = m0`.
    pub fn eval(&self, m0: &Rational) -> Rational {
        &self.constant + &self.slope * m0
    }

    /// Sign under the eventual order.
    pub fn signum(&self) -> Ordering {
        self.cmp(&BigM::zero())
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// The value of `M` above which `self` and `other` no longer change
    /// relative order, or `None` when their slopes agree.
    pub fn crossing(&self, other: &BigM) -> Option<Rational> {
        let ds = &self.slope - &other.slope;
        if ds.is_zero() {
            None
        } else {
            Some((&other.constant - &self.constant) / ds)
        }
    }

    /// Smallest element of a sequence under the eventual order.
    pub fn min_of<'a, I: IntoIterator<Item = &'a BigM>>(items: I) -> Option<BigM> {
        items.into_iter().min().cloned()
    }

    /// Largest element of a sequence under the eventual order.
    pub fn max_of<'a, I: IntoIterator<Item = &'a BigM>>(items: I) -> Option<BigM> {
        items.into_iter().max().cloned()
    }
}

impl Zero for BigM {
    fn zero() -> Self {
        BigM { constant: Rational::zero(), slope: Rational::zero() }
    }

    fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.slope.is_zero()
    }
}

impl From<Rational> for BigM {
    fn from(value: Rational) -> Self {
        BigM::constant(value)
    }
}

impl From<i64> for BigM {
    fn from(value: i64) -> Self {
        BigM::from_int(value)
    }
}

impl Ord for BigM {
    fn cmp(&self, other: &Self) -> Ordering {
        self.slope.cmp(&other.slope).then_with(|| self.constant.cmp(&other.constant))
    }
}

impl PartialOrd for BigM {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a BigM> for &'a BigM {
    type Output = BigM;
    fn add(self, rhs: &'a BigM) -> BigM {
        BigM { constant: &self.constant + &rhs.constant, slope: &self.slope + &rhs.slope }
    }
}

impl Add for BigM {
    type Output = BigM;
    fn add(self, rhs: BigM) -> BigM {
        BigM { constant: self.constant + rhs.constant, slope: self.slope + rhs.slope }
    }
}

impl<'a> Sub<&'a BigM> for &'a BigM {
    type Output = BigM;
    fn sub(self, rhs: &'a BigM) -> BigM {
        BigM { constant: &self.constant - &rhs.constant, slope: &self.slope - &rhs.slope }
    }
}

impl Sub for BigM {
    type Output = BigM;
    fn sub(self, rhs: BigM) -> BigM {
        BigM { constant: self.constant - rhs.constant, slope: self.slope - rhs.slope }
    }
}

impl AddAssign<&BigM> for BigM {
    fn add_assign(&mut self, rhs: &BigM) {
        self.constant += &rhs.constant;
        self.slope += &rhs.slope;
    }
}

impl SubAssign<&BigM> for BigM {
    fn sub_assign(&mut self, rhs: &BigM) {
        self.constant -= &rhs.constant;
        self.slope -= &rhs.slope;
    }
}

impl Neg for BigM {
    type Output = BigM;
    fn neg(self) -> BigM {
        BigM { constant: -self.constant, slope: -self.slope }
    }
}

impl Neg for &BigM {
    type Output = BigM;
    fn neg(self) -> BigM {
        BigM { constant: -&self.constant, slope: -&self.slope }
    }
}

impl Mul<&Rational> for &BigM {
    type Output = BigM;
    fn mul(self, rhs: &Rational) -> BigM {
        self.scale(rhs)
    }
}

impl<'a> Sum<&'a BigM> for BigM {
    fn sum<I: Iterator<Item = &'a BigM>>(iter: I) -> BigM {
        iter.fold(BigM::zero(), |mut acc, x| {
            acc += x;
            acc
        })
    }
}

impl Sum for BigM {
    fn sum<I: Iterator<Item = BigM>>(iter: I) -> BigM {
        iter.fold(BigM::zero(), |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

impl fmt::Display for BigM {
    /// `a`, `a/b`, `a+c*M`, `a/b-c/d*M`; the constant is always written
    /// when the slope is nonzero.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.constant))?;
        if !self.slope.is_zero() {
            let sign = if self.slope.is_negative() { '-' } else { '+' };
            write!(f, "{sign}{}*M", format_rational(&self.slope.abs()))?;
        }
        Ok(())
    }
}

impl BigM {
    /// Like `Display`, with both parts rendered as decimals.
    pub fn to_decimal_string(&self, places: usize) -> String {
        let mut out = format_decimal(&self.constant, places);
        if !self.slope.is_zero() {
            let sign = if self.slope.is_negative() { '-' } else { '+' };
            out.push(sign);
            out.push_str(&format_decimal(&self.slope.abs(), places));
            out.push_str("*M");
        }
        out
    }
}

impl FromStr for BigM {
    type Err = ParseScalarError;

    /// Accepts the printed forms plus the shorthands `M`, `-M`, `c*M`, `a+M`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() {
            return Err(ParseScalarError::Empty);
        }
        let Some(head) = t.strip_suffix('M') else {
            return Ok(BigM::constant(parse_rational(t)?));
        };
        let head = match head.strip_suffix('*') {
            Some(h) if h.ends_with(|c: char| c.is_ascii_digit()) => h,
            Some(_) => return Err(ParseScalarError::InvalidRational(t.to_string())),
            None => head,
        };
        // The split between constant and coefficient is the last sign that is
        // not the leading character.
        let split = head.char_indices().skip(1).filter(|&(_, c)| c == '+' || c == '-').map(|(i, _)| i).last();
        let (constant_text, coeff_text) = match split {
            Some(i) => (&head[..i], &head[i..]),
            None => ("", head),
        };
        let constant = if constant_text.is_empty() { Rational::zero() } else { parse_rational(constant_text)? };
        let slope = match coeff_text {
            "" | "+" => Rational::one(),
            "-" => -Rational::one(),
            other => parse_rational(other)?,
        };
        Ok(BigM { constant, slope })
    }
}
