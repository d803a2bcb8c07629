//! Numeric field abstraction shared by the LP layer and the two-buyer module.
//!
//! `f64` compares against a caller-supplied tolerance; `BigRational` is exact
//! and ignores it.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::ParseNumberError;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn from_rational(v: &BigRational) -> Self;
    /// `"p/q"` for rationals, shortest round-trip decimal for floats.
    fn render(&self) -> String;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;

    /// Sign of `self`, treating `|self| <= tol` as zero for inexact types.
    fn sign(&self, tol: f64) -> Ordering;

    fn cmp_tol(&self, other: &Self, tol: f64) -> Ordering {
        (self.clone() - other.clone()).sign(tol)
    }

    fn is_zero_tol(&self, tol: f64) -> bool {
        self.sign(tol) == Ordering::Equal
    }

    fn is_pos_tol(&self, tol: f64) -> bool {
        self.sign(tol) == Ordering::Greater
    }

    fn is_neg_tol(&self, tol: f64) -> bool {
        self.sign(tol) == Ordering::Less
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn sum<'a, I: IntoIterator<Item = &'a Self>>(items: I) -> Self
    where
        Self: 'a,
    {
        items
            .into_iter()
            .fold(Self::zero(), |acc, v| acc + v.clone())
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_rational(v: &BigRational) -> Self {
        ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
    }
    fn render(&self) -> String {
        format!("{self}")
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sign(&self, tol: f64) -> Ordering {
        if *self > tol {
            Ordering::Greater
        } else if *self < -tol {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }
    fn from_rational(v: &BigRational) -> Self {
        v.clone()
    }
    fn render(&self) -> String {
        format_rational(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn sign(&self, _tol: f64) -> Ordering {
        if self.is_positive() {
            Ordering::Greater
        } else if self.is_negative() {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

/// Parses `"3"`, `"-2.75"`, `"1e-3"` or `"7/3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseNumberError> {
    let t = text.trim();
    let err = || ParseNumberError(text.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n = parse_rational(num)?;
        let d = parse_rational(den)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().map_err(|_| err())?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -value } else { value })
}

/// Formats a rational as `"p"` or `"p/q"`.
pub fn format_rational(v: &BigRational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
