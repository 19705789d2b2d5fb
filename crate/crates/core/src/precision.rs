//! Configurable-precision real numbers.
//!
//! [`Real`] is a radix-2 floating-point value whose mantissa width is fixed by a
//! [`PrecisionConfig`] chosen before a run starts. Arithmetic between values of
//! different widths is a programming error and panics; a run constructs all of
//! its constants from one configuration.
//!
//! Decimal serialization is exact in both directions: formatting rounds the
//! exact binary value to the requested number of significant digits, and
//! parsing rounds the exact decimal value to the nearest representable `Real`.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, RoundingMode, Sign, Word};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

const RM: RoundingMode = RoundingMode::ToEven;
const WORD_BITS: usize = Word::BITS as usize;
/// Extra bits carried through transcendental evaluations before the final rounding.
const GUARD_BITS: usize = 64;
const MIN_BITS: usize = 53;
const MAX_BITS: usize = 1 << 20;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("allocate constant cache"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrecisionError {
    #[error("mantissa width of {0} bits is below the {MIN_BITS}-bit minimum")]
    TooFewBits(usize),
    #[error("mantissa width of {0} bits exceeds the supported maximum")]
    TooManyBits(usize),
    #[error("logarithm of zero is undefined")]
    LogOfZero,
    #[error("invalid decimal literal {0:?}")]
    InvalidLiteral(String),
    #[error("precision mismatch: expected {expected} bits, found {found}")]
    Mismatch { expected: usize, found: usize },
}

/// Binary precision shared by every value of a run.
///
/// The backing arithmetic allocates mantissas in 64-bit words, so the requested
/// width is rounded up to the next multiple of 64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionConfig {
    mantissa_bits: usize,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self { mantissa_bits: Self::DEFAULT_BITS }
    }
}

impl PrecisionConfig {
    pub const DEFAULT_BITS: usize = 512;

    pub fn new(mantissa_bits: usize) -> Result<Self, PrecisionError> {
        if mantissa_bits < MIN_BITS {
            return Err(PrecisionError::TooFewBits(mantissa_bits));
        }
        if mantissa_bits > MAX_BITS {
            return Err(PrecisionError::TooManyBits(mantissa_bits));
        }
        let mantissa_bits = mantissa_bits.div_ceil(WORD_BITS) * WORD_BITS;
        Ok(Self { mantissa_bits })
    }

    pub fn mantissa_bits(&self) -> usize {
        self.mantissa_bits
    }

    /// `ceil(mantissa_bits * log10(2))`.
    pub fn decimal_digits(&self) -> usize {
        (self.mantissa_bits as f64 * std::f64::consts::LOG10_2).ceil() as usize
    }

    /// Significant digits written by [`Real::to_decimal_string`]; one more than
    /// [`decimal_digits`](Self::decimal_digits), which is the minimum for an
    /// exact binary-decimal-binary round trip.
    pub fn serial_digits(&self) -> usize {
        self.decimal_digits() + 1
    }

    pub fn zero(&self) -> Real {
        Real::wrap(BigFloat::from_word(0, self.mantissa_bits), self.mantissa_bits)
    }

    pub fn one(&self) -> Real {
        self.int(1)
    }

    pub fn int(&self, v: i64) -> Real {
        Real::wrap(BigFloat::from_i64(v, self.mantissa_bits), self.mantissa_bits)
    }

    /// Correctly rounded `num / den`.
    pub fn ratio(&self, num: i64, den: u64) -> Real {
        assert!(den != 0, "zero denominator");
        let n = BigFloat::from_i64(num, self.mantissa_bits);
        let d = BigFloat::from_u64(den, self.mantissa_bits);
        Real::wrap(n.div(&d, self.mantissa_bits, RM), self.mantissa_bits)
    }

    /// Exact `2^e`.
    pub fn pow2(&self, e: i64) -> Real {
        let mut v = BigFloat::from_word(1, self.mantissa_bits);
        let e1 = v.exponent().expect("finite") as i64 + e;
        v.set_exponent(i32::try_from(e1).expect("exponent in range"));
        Real::wrap(v, self.mantissa_bits)
    }

    /// Unit roundoff scale `2^(1 - mantissa_bits)`.
    pub fn epsilon(&self) -> Real {
        self.pow2(1 - self.mantissa_bits as i64)
    }

    pub fn parse(&self, s: &str) -> Result<Real, PrecisionError> {
        Real::parse(s, *self)
    }

    /// Parses a decimal literal or a quotient of two decimal literals (`"1/3"`).
    pub fn parse_rational(&self, s: &str) -> Result<Real, PrecisionError> {
        match s.split_once('/') {
            None => self.parse(s),
            Some((n, d)) => {
                let n = self.parse(n.trim())?;
                let d = self.parse(d.trim())?;
                if d.is_zero() {
                    return Err(PrecisionError::InvalidLiteral(s.to_string()));
                }
                Ok(n / d)
            }
        }
    }

    pub fn from_f64(&self, v: f64) -> Real {
        Real::wrap(BigFloat::from_f64(v, self.mantissa_bits), self.mantissa_bits)
    }
}

/// A finite radix-2 floating-point number of fixed precision.
#[derive(Clone)]
pub struct Real {
    v: BigFloat,
    bits: usize,
}

impl Real {
    fn wrap(v: BigFloat, bits: usize) -> Self {
        debug_assert!(!v.is_nan(), "NaN produced");
        Self { v, bits }
    }

    #[inline]
    fn check(&self, other: &Real) {
        assert_eq!(
            self.bits, other.bits,
            "mixing precisions in one computation is not allowed"
        );
    }

    pub fn precision(&self) -> PrecisionConfig {
        PrecisionConfig { mantissa_bits: self.bits }
    }

    pub fn mantissa_bits(&self) -> usize {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && self.v.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        !self.is_zero() && self.v.is_negative()
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.v.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn abs(&self) -> Real {
        Real::wrap(self.v.abs(), self.bits)
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn square(&self) -> Real {
        self * self
    }

    pub fn sqrt(&self) -> Real {
        assert!(!self.is_negative(), "square root of a negative number");
        Real::wrap(self.v.sqrt(self.bits, RM), self.bits)
    }

    /// Natural logarithm of a positive value.
    pub fn ln(&self) -> Real {
        assert!(self.is_positive(), "logarithm of a non-positive number");
        let p = self.bits + GUARD_BITS;
        let r = with_consts(|cc| self.v.ln(p, RM, cc));
        Real::rounded(r, self.bits)
    }

    pub fn exp(&self) -> Real {
        let p = self.bits + GUARD_BITS;
        let r = with_consts(|cc| self.v.exp(p, RM, cc));
        Real::rounded(r, self.bits)
    }

    pub fn log10(&self) -> Real {
        assert!(self.is_positive(), "logarithm of a non-positive number");
        let p = self.bits + GUARD_BITS;
        let r = with_consts(|cc| self.v.log10(p, RM, cc));
        Real::rounded(r, self.bits)
    }

    /// `log10(|t|)`; fails for `t = 0`.
    pub fn log10_abs(&self) -> Result<Real, PrecisionError> {
        if self.is_zero() {
            return Err(PrecisionError::LogOfZero);
        }
        Ok(self.abs().log10())
    }

    pub fn powi(&self, n: u32) -> Real {
        if n == 0 {
            return self.precision().one();
        }
        let p = self.bits + GUARD_BITS;
        Real::rounded(self.v.powi(n as usize, p, RM), self.bits)
    }

    /// `x^r` for `x >= 0`, `r > 0`.
    pub fn powr(&self, r: &Real) -> Real {
        self.check(r);
        assert!(!self.is_negative(), "real power of a negative base");
        assert!(r.is_positive(), "non-positive exponent");
        if self.is_zero() {
            return self.clone();
        }
        let p = self.bits + GUARD_BITS;
        let r = with_consts(|cc| {
            let l = self.v.ln(p, RM, cc);
            l.mul(&r.v, p, RM).exp(p, RM, cc)
        });
        Real::rounded(r, self.bits)
    }

    /// `x^(num/den)` for `x >= 0`. Integer exponents are evaluated by repeated
    /// multiplication; the rest through `exp` and `ln` with guard bits.
    pub fn pow_ratio(&self, num: u32, den: u32) -> Real {
        assert!(den > 0 && num > 0, "exponent must be positive");
        assert!(!self.is_negative(), "rational power of a negative base");
        if num % den == 0 {
            return self.powi(num / den);
        }
        if self.is_zero() {
            return self.clone();
        }
        let p = self.bits + GUARD_BITS;
        let r = with_consts(|cc| {
            let e = BigFloat::from_u32(num, p).div(&BigFloat::from_u32(den, p), p, RM);
            self.v.ln(p, RM, cc).mul(&e, p, RM).exp(p, RM, cc)
        });
        Real::rounded(r, self.bits)
    }

    /// Odd extension of the power function: `|t|^(r-1) * t`.
    pub fn signed_power(&self, r: &Real) -> Real {
        let m = self.abs().powr(r);
        if self.is_negative() {
            -m
        } else {
            m
        }
    }

    /// [`signed_power`](Self::signed_power) with a rational exponent `num/den`.
    pub fn signed_power_ratio(&self, num: u32, den: u32) -> Real {
        let m = self.abs().pow_ratio(num, den);
        if self.is_negative() {
            -m
        } else {
            m
        }
    }

    /// Exact multiplication by `2^k`.
    pub fn mul_pow2(&self, k: i64) -> Real {
        if self.is_zero() {
            return self.clone();
        }
        let mut v = self.v.clone();
        let e = v.exponent().expect("finite") as i64 + k;
        v.set_exponent(i32::try_from(e).expect("exponent in range"));
        Real::wrap(v, self.bits)
    }

    /// Binary exponent `e` with `2^(e-1) <= |x| < 2^e`; `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            self.v.exponent().map(i64::from)
        }
    }

    /// Spacing of representable values at `|self|`; for zero, the spacing at 1.
    pub fn ulp(&self) -> Real {
        let e = self.exponent().unwrap_or(1);
        self.precision().pow2(e - self.bits as i64)
    }

    /// Nearest `f64` (truncated mantissa); for reporting only.
    pub fn to_f64(&self) -> f64 {
        let Some((m, e2)) = self.mantissa_and_exp() else {
            return 0.0;
        };
        let shift = m.bits().saturating_sub(64);
        let top = (&m >> shift).to_u64().expect("fits");
        let v = top as f64 * 2f64.powi((e2 + shift as i64).clamp(-2000, 2000) as i32);
        if self.is_negative() {
            -v
        } else {
            v
        }
    }

    fn rounded(mut v: BigFloat, bits: usize) -> Real {
        v.set_precision(bits, RM).expect("valid precision");
        Real::wrap(v, bits)
    }

    /// `|self| = m * 2^e`, `m` an integer.
    fn mantissa_and_exp(&self) -> Option<(BigUint, i64)> {
        if self.is_zero() {
            return None;
        }
        let (words, _, _, e, _) = self.v.as_raw_parts()?;
        let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
        let m = BigUint::from_bytes_le(&bytes);
        Some((m, e as i64 - (words.len() * WORD_BITS) as i64))
    }

    /// Scientific notation with exactly `digits` significant digits, rounded
    /// half-to-even from the exact binary value, e.g. `-1.2345e-101`.
    pub fn to_decimal(&self, digits: usize) -> String {
        assert!(digits >= 1);
        let Some((m, e2)) = self.mantissa_and_exp() else {
            return if digits == 1 {
                "0e0".to_string()
            } else {
                format!("0.{}e0", "0".repeat(digits - 1))
            };
        };
        let lower = BigUint::from(10u32).pow(digits as u32 - 1);
        let upper = &lower * 10u32;
        let top_bit = m.bits() as i64 - 1 + e2;
        let mut d10 = (top_bit as f64 * std::f64::consts::LOG10_2).floor() as i64;
        let n = loop {
            let k = digits as i64 - 1 - d10;
            let mut num = m.clone();
            let mut den = BigUint::one();
            if e2 >= 0 {
                num <<= e2 as u64;
            } else {
                den <<= (-e2) as u64;
            }
            if k >= 0 {
                num *= BigUint::from(10u32).pow(k as u32);
            } else {
                den *= BigUint::from(10u32).pow((-k) as u32);
            }
            let n = div_round_half_even(&num, &den);
            if n >= upper {
                d10 += 1;
            } else if n < lower {
                d10 -= 1;
            } else {
                break n;
            }
        };
        let s = n.to_string();
        let sign = if self.is_negative() { "-" } else { "" };
        if digits == 1 {
            format!("{sign}{s}e{d10}")
        } else {
            format!("{sign}{}.{}e{d10}", &s[..1], &s[1..])
        }
    }

    /// [`to_decimal`](Self::to_decimal) at the configuration's serialization width.
    pub fn to_decimal_string(&self) -> String {
        self.to_decimal(self.precision().serial_digits())
    }

    /// Parses `[+-]digits[.digits][(e|E)[+-]digits]`, correctly rounded.
    pub fn parse(s: &str, prec: PrecisionConfig) -> Result<Real, PrecisionError> {
        let bad = || PrecisionError::InvalidLiteral(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (body, None),
        };
        let (int_part, frac_part) = match mant.split_once('.') {
            Some((a, b)) => (a, b),
            None => (mant, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut e10: i64 = match exp {
            None => 0,
            Some(e) => e.parse().map_err(|_| bad())?,
        };
        e10 -= frac_part.len() as i64;
        let digits = format!("{int_part}{frac_part}");
        let n = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(bad)?;
        if n.is_zero() {
            return Ok(prec.zero());
        }
        if e10.abs() > 100_000 {
            return Err(bad());
        }
        let p = prec.mantissa_bits;
        let mut num = n;
        let mut den = BigUint::one();
        if e10 >= 0 {
            num *= BigUint::from(10u32).pow(e10 as u32);
        } else {
            den *= BigUint::from(10u32).pow((-e10) as u32);
        }
        // scale so the integer quotient carries p + 2 or more bits
        let shift = (p as i64 + 2) - (num.bits() as i64 - den.bits() as i64);
        if shift >= 0 {
            num <<= shift as u64;
        } else {
            den <<= (-shift) as u64;
        }
        let q = &num / &den;
        let sticky = !(&num % &den).is_zero();
        let mut extra = q.bits() as i64 - p as i64;
        debug_assert!(extra >= 1);
        let mut mant = &q >> extra as u64;
        let low = &q - (&mant << extra as u64);
        let half = BigUint::one() << (extra - 1) as u64;
        let round_up = low > half || (low == half && (sticky || mant.bit(0)));
        if round_up {
            mant += 1u32;
            if mant.bits() as usize > p {
                mant >>= 1u32;
                extra += 1;
            }
        }
        // value = mant * 2^(extra - shift) with mant of exactly p bits
        let e = p as i64 + extra - shift;
        let mut bytes = mant.to_bytes_le();
        bytes.resize(p / 8, 0);
        let words: Vec<Word> = bytes
            .chunks(WORD_BITS / 8)
            .map(|c| Word::from_le_bytes(c.try_into().expect("word chunk")))
            .collect();
        let sign = if neg { Sign::Neg } else { Sign::Pos };
        let e = i32::try_from(e).map_err(|_| bad())?;
        let v = BigFloat::from_words(&words, sign, e);
        if v.is_nan() || v.is_inf() {
            return Err(bad());
        }
        Ok(Real::wrap(v, p))
    }
}

fn div_round_half_even(num: &BigUint, den: &BigUint) -> BigUint {
    let q = num / den;
    let r = num - &q * den;
    let twice = &r << 1u32;
    match twice.cmp(den) {
        Ordering::Greater => q + 1u32,
        Ordering::Equal if q.bit(0) => q + 1u32,
        _ => q,
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.v.cmp(&other.v) {
            Some(c) => c.cmp(&0),
            None => panic!("comparison involving NaN"),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(d) => f.write_str(&self.to_decimal(d.max(1))),
            None => f.write_str(&self.to_decimal_string()),
        }
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_decimal(24))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:ident) => {
        impl $tr<&Real> for &Real {
            type Output = Real;
            fn $m(self, rhs: &Real) -> Real {
                self.check(rhs);
                Real::wrap(self.v.$op(&rhs.v, self.bits, RM), self.bits)
            }
        }
        impl $tr<Real> for &Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                self.$m(&rhs)
            }
        }
        impl $tr<&Real> for Real {
            type Output = Real;
            fn $m(self, rhs: &Real) -> Real {
                (&self).$m(rhs)
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                (&self).$m(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl AddAssign<&Real> for Real {
    fn add_assign(&mut self, rhs: &Real) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Real> for Real {
    fn add_assign(&mut self, rhs: Real) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Real> for Real {
    fn sub_assign(&mut self, rhs: &Real) {
        *self = &*self - rhs;
    }
}

impl SubAssign<Real> for Real {
    fn sub_assign(&mut self, rhs: Real) {
        *self = &*self - &rhs;
    }
}

impl MulAssign<&Real> for Real {
    fn mul_assign(&mut self, rhs: &Real) {
        *self = &*self * rhs;
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::wrap(BigFloat::neg(&self.v), self.bits)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::wrap(BigFloat::neg(&self.v), self.bits)
    }
}

impl<'a> Sum<&'a Real> for Option<Real> {
    fn sum<I: Iterator<Item = &'a Real>>(iter: I) -> Self {
        iter.fold(None, |acc, x| match acc {
            None => Some(x.clone()),
            Some(a) => Some(a + x),
        })
    }
}

/// Exact integer `n!` as a `Real`.
pub fn factorial(n: u32, prec: PrecisionConfig) -> Real {
    (2..=n as i64).fold(prec.one(), |acc, k| acc * prec.int(k))
}
