//! Dual-mode probability arithmetic.
//!
//! Every probability-valued operation in the crate can run in one of two
//! modes: `Exact` carries arbitrary-precision rationals and is the oracle
//! grade used for certified comparisons; `Log` carries natural-log floats
//! and is the fast grade used for parameter sweeps at densities like 0.999
//! on deep balls, where linear-domain floats underflow.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mode selected per call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Log,
}

/// Occupation density p as an exact rational in (0,1).
///
/// Densities are stored reduced. Decimal strings parse exactly
/// ("0.999" is 999/1000), so the exact mode never sees a rounded p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Density {
    num: u64,
    den: u64,
}

impl Density {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::InvalidDensity(format!(
                "{num}/{den} is not in the open interval (0,1)"
            )));
        }
        let g = gcd(num, den);
        Ok(Density {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses "0.999", ".5" or "999/1000".
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |_| Error::InvalidDensity(format!("cannot parse {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let num: u64 = n.trim().parse().map_err(bad)?;
            let den: u64 = d.trim().parse().map_err(bad)?;
            return Density::new(num, den);
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty()
                || frac_part.len() > 18
                || !frac_part.bytes().all(|b| b.is_ascii_digit())
            {
                return Err(Error::InvalidDensity(format!("cannot parse {s:?}")));
            }
            let int: u64 = if int_part.is_empty() {
                0
            } else {
                int_part.parse().map_err(bad)?
            };
            let frac: u64 = frac_part.parse().map_err(bad)?;
            let den = 10u64.pow(frac_part.len() as u32);
            let num = int
                .checked_mul(den)
                .and_then(|v| v.checked_add(frac))
                .ok_or_else(|| Error::InvalidDensity(format!("{s:?} overflows")))?;
            return Density::new(num, den);
        }
        // A bare integer can only be 0 or 1, both outside (0,1).
        Err(Error::InvalidDensity(format!(
            "{s:?} is not a density in (0,1)"
        )))
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// p as a big rational.
    pub fn ratio(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    /// 1-p as a big rational.
    pub fn complement(&self) -> BigRational {
        BigRational::new(BigInt::from(self.den - self.num), BigInt::from(self.den))
    }

    /// (1-p)/p as a big rational.
    pub fn odds_against(&self) -> BigRational {
        BigRational::new(BigInt::from(self.den - self.num), BigInt::from(self.num))
    }

    /// ln p.
    pub fn ln(&self) -> f64 {
        (self.num as f64).ln() - (self.den as f64).ln()
    }

    /// ln(1-p).
    pub fn ln_complement(&self) -> f64 {
        ((self.den - self.num) as f64).ln() - (self.den as f64).ln()
    }
}

impl std::fmt::Display for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Log-domain nonnegative value: the natural log, with NEG_INFINITY for
/// zero. NaN is forbidden and checked on every construction.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub fn from_ln(l: f64) -> Self {
        debug_assert!(!l.is_nan(), "log-domain value must not be NaN");
        LogProb(l)
    }

    pub fn ln_value(&self) -> f64 {
        self.0
    }

    pub fn linear(&self) -> f64 {
        self.0.exp()
    }

    fn logsumexp(a: f64, b: f64) -> f64 {
        if a == f64::NEG_INFINITY {
            b
        } else if b == f64::NEG_INFINITY {
            a
        } else if a >= b {
            a + (b - a).exp().ln_1p()
        } else {
            b + (a - b).exp().ln_1p()
        }
    }
}

/// A probability (or nonnegative bound value) in one of the two modes.
///
/// Values produced as probabilities lie in the unit interval; Peierls-style
/// bound values reuse the same carrier and may exceed 1.
#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Log(LogProb),
}

impl Prob {
    pub fn mode(&self) -> Mode {
        match self {
            Prob::Exact(_) => Mode::Exact,
            Prob::Log(_) => Mode::Log,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Log(_) => None,
        }
    }

    pub fn f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => rational_to_f64(r),
            Prob::Log(l) => l.linear(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_zero(),
            Prob::Log(l) => l.ln_value() == f64::NEG_INFINITY,
        }
    }

    /// Same-mode <= comparison: exact rational order in exact mode, float
    /// order of the logs in log mode.
    pub fn le(&self, other: &Prob) -> bool {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => a <= b,
            (Prob::Log(a), Prob::Log(b)) => a.ln_value() <= b.ln_value(),
            _ => self.f64() <= other.f64(),
        }
    }

    /// |self/other - 1|, via f64. Zero/zero counts as equal.
    pub fn rel_err(&self, other: &Prob) -> f64 {
        if let (Prob::Exact(a), Prob::Exact(b)) = (self, other) {
            if a == b {
                return 0.0;
            }
            if !b.is_zero() {
                return rational_to_f64(&((a - b) / b)).abs();
            }
        }
        let (a, b) = (self.f64(), other.f64());
        if a == b {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            (a / b - 1.0).abs()
        }
    }

    /// Renders as `num/den` in exact mode, 15 significant digits otherwise.
    pub fn render(&self) -> String {
        match self {
            Prob::Exact(r) => format!("{}/{}", r.numer(), r.denom()),
            Prob::Log(l) => crate::report::fmt_sig(l.linear()),
        }
    }
}

/// Converts a big rational to f64, falling back to a scaled conversion when
/// numerator or denominator overflow f64 range (deep-ball partition values).
pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let Some(v) = r.to_f64() {
        if v.is_finite() && (v != 0.0) {
            return v;
        }
    }
    // Scale by powers of two via bit lengths.
    let num = r.numer();
    let den = r.denom();
    let shift = num.bits() as i64 - den.bits() as i64;
    let scaled = if shift >= 0 {
        BigRational::new(num.clone() >> shift as u64, den.clone())
    } else {
        BigRational::new(num.clone(), den.clone() >> (-shift) as u64)
    };
    let base = scaled
        .to_f64()
        .unwrap_or(if r.is_negative() { -1.0 } else { 1.0 });
    base * (shift as f64).exp2()
}

/// Semiring-with-division used by the tree dynamic programs. Implemented by
/// `BigRational` (exact mode) and `LogProb` (log mode); the public API
/// dispatches on [`Mode`] and wraps results in [`Prob`].
pub(crate) trait Weight: Clone + std::fmt::Debug {
    fn nil() -> Self;
    fn unit() -> Self;
    /// Weight of an occupied vertex: p.
    fn occupied(p: &Density) -> Self;
    /// Weight of an unoccupied vertex: 1-p.
    fn empty(p: &Density) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn over(&self, other: &Self) -> Self;
    fn power(&self, k: u32) -> Self;
    fn into_prob(self) -> Prob;
}

impl Weight for BigRational {
    fn nil() -> Self {
        <BigRational as Zero>::zero()
    }

    fn unit() -> Self {
        <BigRational as One>::one()
    }

    fn occupied(p: &Density) -> Self {
        p.ratio()
    }

    fn empty(p: &Density) -> Self {
        p.complement()
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn times(&self, other: &Self) -> Self {
        self * other
    }

    fn over(&self, other: &Self) -> Self {
        self / other
    }

    fn power(&self, k: u32) -> Self {
        num_traits::pow::pow(self.clone(), k as usize)
    }

    fn into_prob(self) -> Prob {
        Prob::Exact(self)
    }
}

impl Weight for LogProb {
    fn nil() -> Self {
        LogProb(f64::NEG_INFINITY)
    }

    fn unit() -> Self {
        LogProb(0.0)
    }

    fn occupied(p: &Density) -> Self {
        LogProb(p.ln())
    }

    fn empty(p: &Density) -> Self {
        LogProb(p.ln_complement())
    }

    fn plus(&self, other: &Self) -> Self {
        LogProb::from_ln(LogProb::logsumexp(self.0, other.0))
    }

    fn times(&self, other: &Self) -> Self {
        LogProb::from_ln(self.0 + other.0)
    }

    fn over(&self, other: &Self) -> Self {
        debug_assert!(other.0 != f64::NEG_INFINITY, "division by log-domain zero");
        LogProb::from_ln(self.0 - other.0)
    }

    fn power(&self, k: u32) -> Self {
        if k == 0 {
            return LogProb(0.0);
        }
        LogProb::from_ln(self.0 * k as f64)
    }

    fn into_prob(self) -> Prob {
        Prob::Log(self)
    }
}
