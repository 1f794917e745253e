//! Multiple-precision complex numbers on top of MPFR floats.
//!
//! [`MpComplex`] carries its working precision with it. Binary operations
//! round their result to the larger of the two operand precisions, so a
//! computation seeded with high-precision inputs stays at high precision
//! without any global state.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Real number at an explicit precision.
pub type Real = Float;

/// Precision used for everything that only needs double-precision-like accuracy.
pub const DEFAULT_BITS: u32 = 64;

pub fn real(prec: u32, x: f64) -> Real {
    Float::with_val(prec, x)
}

pub fn pi(prec: u32) -> Real {
    Float::with_val(prec, Constant::Pi)
}

/// `2^-bits` as a plain `f64` (0 when it underflows).
pub fn eps_f64(bits: u32) -> f64 {
    (-(bits as f64) * std::f64::consts::LN_2).exp()
}

/// Parses a decimal real at the given precision.
pub fn parse_real(prec: u32, s: &str) -> Result<Real> {
    let parsed = Float::parse(s.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    Ok(Float::with_val(prec, parsed))
}

#[derive(Clone, PartialEq)]
pub struct MpComplex {
    re: Float,
    im: Float,
}

impl MpComplex {
    pub fn new(prec: u32, re: f64, im: f64) -> Self {
        MpComplex {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_parts(re: Float, im: Float) -> Self {
        MpComplex { re, im }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        MpComplex {
            re,
            im: Float::new(prec),
        }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Self::new(prec, z.re, z.im)
    }

    pub fn zero(prec: u32) -> Self {
        Self::new(prec, 0.0, 0.0)
    }

    pub fn one(prec: u32) -> Self {
        Self::new(prec, 1.0, 0.0)
    }

    pub fn i(prec: u32) -> Self {
        Self::new(prec, 0.0, 1.0)
    }

    /// `e^{i theta}` for a real angle.
    pub fn cis(theta: &Float) -> Self {
        let prec = theta.prec();
        let (s, c) = theta.clone().sin_cos(Float::new(prec));
        MpComplex { re: c, im: s }
    }

    /// Parses `re,im` (or a bare real) at the given precision.
    pub fn parse(prec: u32, s: &str) -> Result<Self> {
        let mut parts = s.split(',');
        let re = parts.next().unwrap_or("");
        let im = parts.next();
        if parts.next().is_some() {
            return Err(Error::Parse(format!("expected `re,im`, got {s:?}")));
        }
        let re = parse_real(prec, re)?;
        let im = match im {
            Some(v) => parse_real(prec, v)?,
            None => Float::new(prec),
        };
        Ok(MpComplex { re, im })
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn re(&self) -> &Float {
        &self.re
    }

    pub fn im(&self) -> &Float {
        &self.im
    }

    pub fn into_parts(self) -> (Float, Float) {
        (self.re, self.im)
    }

    /// Rounds (or extends) both parts to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Self {
        MpComplex {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        MpComplex {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let prec = self.prec();
        let mut out = Float::with_val(prec, self.re.square_ref());
        out += Float::with_val(prec, self.im.square_ref());
        out
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn abs_f64(&self) -> f64 {
        self.abs().to_f64()
    }

    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    pub fn scale(&self, k: &Float) -> Self {
        let prec = self.prec().max(k.prec());
        MpComplex {
            re: Float::with_val(prec, &self.re * k),
            im: Float::with_val(prec, &self.im * k),
        }
    }

    pub fn scale_f64(&self, k: f64) -> Self {
        let prec = self.prec();
        MpComplex {
            re: Float::with_val(prec, &self.re * k),
            im: Float::with_val(prec, &self.im * k),
        }
    }

    /// Exact-divisor division by an integer.
    pub fn div_u64(&self, d: u64) -> Self {
        let prec = self.prec();
        MpComplex {
            re: Float::with_val(prec, &self.re / d),
            im: Float::with_val(prec, &self.im / d),
        }
    }

    pub fn add_real(&self, x: &Float) -> Self {
        let prec = self.prec().max(x.prec());
        MpComplex {
            re: Float::with_val(prec, &self.re + x),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn add_f64(&self, x: f64) -> Self {
        let prec = self.prec();
        MpComplex {
            re: Float::with_val(prec, &self.re + x),
            im: self.im.clone(),
        }
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        let re = Float::with_val(d.prec(), &self.re / &d);
        let im = -Float::with_val(d.prec(), &self.im / &d);
        MpComplex { re, im }
    }

    /// Principal square root (branch cut along the negative real axis,
    /// boundary values taken from the upper half plane).
    pub fn sqrt(&self) -> Self {
        let prec = self.prec();
        if self.is_zero() {
            return Self::zero(prec);
        }
        let r = self.abs();
        // s = sqrt((|z| + |re|)/2) is free of cancellation.
        let mut s = Float::with_val(prec, self.re.abs_ref());
        s += &r;
        s /= 2;
        s.sqrt_mut();
        let mut q = Float::with_val(prec, self.im.abs_ref());
        q /= &s;
        q /= 2;
        if self.re >= 0 {
            let im = if self.im.is_sign_negative() && !self.im.is_zero() {
                -q
            } else {
                q
            };
            MpComplex { re: s, im }
        } else {
            let im = if self.im.is_sign_negative() && !self.im.is_zero() {
                -s
            } else {
                s
            };
            MpComplex { re: q, im }
        }
    }

    pub fn exp(&self) -> Self {
        let prec = self.prec();
        let m = self.re.clone().exp();
        let (s, c) = self.im.clone().sin_cos(Float::new(prec));
        MpComplex {
            re: Float::with_val(prec, &m * &c),
            im: Float::with_val(prec, &m * &s),
        }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        MpComplex {
            re: self.abs().ln(),
            im: self.arg(),
        }
    }

    pub fn powu(&self, n: u32) -> Self {
        let mut acc = Self::one(self.prec());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Principal power with a complex exponent.
    pub fn powc(&self, e: &MpComplex) -> Self {
        (&self.ln() * e).exp()
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// `self += a * b`, accumulating at `self`'s precision with fused operations.
    pub fn add_mul(&mut self, a: &MpComplex, b: &MpComplex) {
        self.re += &a.re * &b.re;
        self.re -= &a.im * &b.im;
        self.im += &a.re * &b.im;
        self.im += &a.im * &b.re;
    }

    /// `self -= a * b`
    pub fn sub_mul(&mut self, a: &MpComplex, b: &MpComplex) {
        self.re -= &a.re * &b.re;
        self.re += &a.im * &b.im;
        self.im -= &a.re * &b.im;
        self.im -= &a.im * &b.re;
    }
}

impl fmt::Debug for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MpComplex({} {:+}i @{})",
            self.re.to_f64(),
            self.im.to_f64(),
            self.prec()
        )
    }
}

impl fmt::Display for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = display_digits(self.prec());
        write!(
            f,
            "{},{}",
            format_decimal(&self.re, digits),
            format_decimal(&self.im, digits)
        )
    }
}

/// Significant digits printed for a value of the given precision, capped at 30.
pub fn display_digits(prec: u32) -> usize {
    let d = (prec as f64 * std::f64::consts::LOG10_2).floor() as usize;
    d.clamp(1, 30)
}

/// Locale-independent decimal rendering with `digits` significant digits.
///
/// Plain positional notation is used for decimal exponents in [-20, 30];
/// anything outside that range falls back to `d.ddd…e±x`.
pub fn format_decimal(x: &Float, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.to_string();
    }
    if x.is_zero() {
        return "0".to_string();
    }
    let (neg, mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    let exp = exp.unwrap_or(0);
    let mantissa = mantissa.trim_end_matches('0');
    let mantissa = if mantissa.is_empty() { "0" } else { mantissa };
    let sign = if neg { "-" } else { "" };
    // value = 0.<mantissa> * 10^exp
    let body = if (-20..=30).contains(&exp) {
        if exp <= 0 {
            format!("0.{}{}", "0".repeat((-exp) as usize), mantissa)
        } else {
            let e = exp as usize;
            if mantissa.len() <= e {
                format!("{}{}", mantissa, "0".repeat(e - mantissa.len()))
            } else {
                format!("{}.{}", &mantissa[..e], &mantissa[e..])
            }
        }
    } else {
        let (head, tail) = mantissa.split_at(1);
        if tail.is_empty() {
            format!("{}e{}", head, exp - 1)
        } else {
            format!("{}.{}e{}", head, tail, exp - 1)
        }
    };
    format!("{sign}{body}")
}

/// Round-trip-exact decimal rendering for serialization.
pub fn exact_decimal(x: &Float) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
    let (neg, mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    let exp = exp.unwrap_or(0) - 1;
    let (head, tail) = mantissa.split_at(1);
    format!("{}{}.{}e{}", if neg { "-" } else { "" }, head, tail, exp)
}

fn prec2(a: &MpComplex, b: &MpComplex) -> u32 {
    a.prec().max(b.prec())
}

impl Add<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn add(self, rhs: &MpComplex) -> MpComplex {
        let p = prec2(self, rhs);
        MpComplex {
            re: Float::with_val(p, &self.re + &rhs.re),
            im: Float::with_val(p, &self.im + &rhs.im),
        }
    }
}

impl Sub<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn sub(self, rhs: &MpComplex) -> MpComplex {
        let p = prec2(self, rhs);
        MpComplex {
            re: Float::with_val(p, &self.re - &rhs.re),
            im: Float::with_val(p, &self.im - &rhs.im),
        }
    }
}

impl Mul<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn mul(self, rhs: &MpComplex) -> MpComplex {
        let p = prec2(self, rhs);
        let mut re = Float::with_val(p, &self.re * &rhs.re);
        re -= &self.im * &rhs.im;
        let mut im = Float::with_val(p, &self.re * &rhs.im);
        im += &self.im * &rhs.re;
        MpComplex { re, im }
    }
}

impl Div<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn div(self, rhs: &MpComplex) -> MpComplex {
        let p = prec2(self, rhs);
        let d = Float::with_val(p, rhs.norm_sqr());
        let mut re = Float::with_val(p, &self.re * &rhs.re);
        re += Float::with_val(p, &self.im * &rhs.im);
        re /= &d;
        let mut im = Float::with_val(p, &self.im * &rhs.re);
        im -= Float::with_val(p, &self.re * &rhs.im);
        im /= &d;
        MpComplex { re, im }
    }
}

impl Neg for &MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

impl Neg for MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex {
            re: -self.re,
            im: -self.im,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<MpComplex> for MpComplex {
            type Output = MpComplex;
            fn $m(self, rhs: MpComplex) -> MpComplex {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&MpComplex> for MpComplex {
            type Output = MpComplex;
            fn $m(self, rhs: &MpComplex) -> MpComplex {
                (&self).$m(rhs)
            }
        }
        impl $tr<MpComplex> for &MpComplex {
            type Output = MpComplex;
            fn $m(self, rhs: MpComplex) -> MpComplex {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&MpComplex> for MpComplex {
    fn add_assign(&mut self, rhs: &MpComplex) {
        let p = prec2(self, rhs);
        if self.prec() < p {
            *self = self.with_prec(p);
        }
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&MpComplex> for MpComplex {
    fn sub_assign(&mut self, rhs: &MpComplex) {
        let p = prec2(self, rhs);
        if self.prec() < p {
            *self = self.with_prec(p);
        }
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&MpComplex> for MpComplex {
    fn mul_assign(&mut self, rhs: &MpComplex) {
        *self = &*self * rhs;
    }
}

/// Integer power of a real.
pub fn powi_real(x: &Float, n: i32) -> Float {
    Float::with_val(x.prec(), x.pow(n))
}

/// `base^e` for real base > 0 and real exponent.
pub fn powf_real(base: &Float, e: &Float) -> Float {
    let prec = base.prec().max(e.prec());
    Float::with_val(prec, base.pow(e))
}
