//! Complex numbers over any [`Real`] scalar.
//!
//! Complex autodiff is expressed as pairs of real tape nodes, so every
//! operation here decomposes into real arithmetic.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Complex<T = f64> {
    pub re: T,
    pub im: T,
}

pub type Complex64 = Complex<f64>;

impl<T> Complex<T> {
    #[inline]
    pub const fn new(re: T, im: T) -> Self {
        Self { re, im }
    }
}

impl Complex64 {
    pub const ZERO: Self = Self::new(0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0);

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn arg(self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Division that refuses an exact-zero divisor.
    pub fn checked_div(self, rhs: Self) -> Result<Self> {
        if rhs.re == 0.0 && rhs.im == 0.0 {
            return Err(Error::domain("complex division by zero"));
        }
        Ok(self / rhs)
    }
}

impl<T: Real> Complex<T> {
    #[inline]
    pub fn real(re: T) -> Self {
        Self { re, im: re.lift(0.0) }
    }

    /// Constant complex value in the same context as `ctx`.
    #[inline]
    pub fn lift(ctx: T, c: Complex64) -> Self {
        Self::new(ctx.lift(c.re), ctx.lift(c.im))
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    #[inline]
    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> T {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn scale(self, k: T) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    #[inline]
    pub fn scale_f64(self, k: f64) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    #[inline]
    pub fn mul_const(self, c: Complex64) -> Self {
        Self::new(
            self.re * c.re - self.im * c.im,
            self.re * c.im + self.im * c.re,
        )
    }

    pub fn value(self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    /// Principal square root: `Re >= 0`, and `Im >= 0` when `Re == 0`.
    pub fn sqrt(self) -> Self {
        let x = self.re.value();
        let y = self.im.value();
        if x == 0.0 && y == 0.0 {
            return Self::new(self.re.lift(0.0), self.re.lift(0.0));
        }
        let r = self.abs();
        if x >= 0.0 {
            let t = ((r + self.re) * 0.5).sqrt();
            Self::new(t, self.im / (t * 2.0))
        } else {
            let t = ((r - self.re) * 0.5).sqrt();
            let re = self.im.abs() / (t * 2.0);
            // y == 0 on the negative real axis lands on +i by convention
            let im = if y < 0.0 { -t } else { t };
            Self::new(re, im)
        }
    }

    pub fn exp(self) -> Self {
        let m = self.re.exp();
        Self::new(m * self.im.cos(), m * self.im.sin())
    }
}

impl<T: Real> Add for Complex<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Real> Sub for Complex<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Real> Mul for Complex<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl<T: Real> Div for Complex<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        // Smith's algorithm; branch chosen on values only
        if o.re.value().abs() >= o.im.value().abs() {
            let r = o.im / o.re;
            let den = o.re + o.im * r;
            Self::new((self.re + self.im * r) / den, (self.im - self.re * r) / den)
        } else {
            let r = o.re / o.im;
            let den = o.re * r + o.im;
            Self::new((self.re * r + self.im) / den, (self.im * r - self.re) / den)
        }
    }
}

impl<T: Real> Neg for Complex<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl fmt::Display for Complex64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im < 0.0 {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

// Complex numbers on disk are always `[re, im]` pairs.
impl Serialize for Complex64 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.re, self.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Complex64 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
