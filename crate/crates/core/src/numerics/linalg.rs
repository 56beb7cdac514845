//! Complex 2-vectors in the (p, s) polarization basis and 2x2 operators.

use serde::{Deserialize, Serialize};

use super::{Complex, Complex64, Real};
use crate::error::{Error, Result};

/// Component order is `(p, s)`: `h_rx = (1, 0)` selects the p component.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ComplexVec2<T = f64> {
    pub p: Complex<T>,
    pub s: Complex<T>,
}

pub type Vec2c = ComplexVec2<f64>;

impl<T> ComplexVec2<T> {
    pub const fn new(p: Complex<T>, s: Complex<T>) -> Self {
        Self { p, s }
    }
}

impl Vec2c {
    pub const ZERO: Self = Self::new(Complex64::ZERO, Complex64::ZERO);

    pub fn real(p: f64, s: f64) -> Self {
        Self::new(Complex64::new(p, 0.0), Complex64::new(s, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.s.is_finite()
    }

    pub fn to_array(self) -> [Complex64; 2] {
        [self.p, self.s]
    }
}

impl<T: Real> ComplexVec2<T> {
    pub fn norm_sqr(&self) -> T {
        self.p.norm_sqr() + self.s.norm_sqr()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scale(self, k: Complex<T>) -> Self {
        Self::new(self.p * k, self.s * k)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.p + o.p, self.s + o.s)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.p - o.p, self.s - o.s)
    }

    /// Unconjugated dot product `a_p b_p + a_s b_s`.
    pub fn dot(self, o: Self) -> Complex<T> {
        self.p * o.p + self.s * o.s
    }

    pub fn value(&self) -> Vec2c {
        Vec2c::new(self.p.value(), self.s.value())
    }
}

/// 2x2 complex operator acting on `(p, s)` vectors:
/// `[[pp, ps], [sp, ss]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jones2x2<T = f64> {
    pub pp: Complex<T>,
    pub ps: Complex<T>,
    pub sp: Complex<T>,
    pub ss: Complex<T>,
}

pub type Jones = Jones2x2<f64>;

impl<T> Jones2x2<T> {
    pub const fn new(pp: Complex<T>, ps: Complex<T>, sp: Complex<T>, ss: Complex<T>) -> Self {
        Self { pp, ps, sp, ss }
    }
}

impl Jones {
    pub const IDENTITY: Self = Self::new(Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ONE);

    pub fn diagonal(p: Complex64, s: Complex64) -> Self {
        Self::new(p, Complex64::ZERO, Complex64::ZERO, s)
    }

    pub fn det(&self) -> Complex64 {
        self.pp * self.ss - self.ps * self.sp
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.pp, self.ps, self.sp, self.ss]
    }

    pub fn max_row_norm(&self) -> f64 {
        let r0 = (self.pp.norm_sqr() + self.ps.norm_sqr()).sqrt();
        let r1 = (self.sp.norm_sqr() + self.ss.norm_sqr()).sqrt();
        r0.max(r1)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.is_finite())
    }

    pub fn matmul(&self, o: &Jones) -> Jones {
        Jones::new(
            self.pp * o.pp + self.ps * o.sp,
            self.pp * o.ps + self.ps * o.ss,
            self.sp * o.pp + self.ss * o.sp,
            self.sp * o.ps + self.ss * o.ss,
        )
    }
}

impl<T: Real> Jones2x2<T> {
    pub fn apply(&self, v: ComplexVec2<T>) -> ComplexVec2<T> {
        ComplexVec2::new(self.pp * v.p + self.ps * v.s, self.sp * v.p + self.ss * v.s)
    }

    pub fn value(&self) -> Jones {
        Jones::new(self.pp.value(), self.ps.value(), self.sp.value(), self.ss.value())
    }

    pub fn frobenius_sqr(&self) -> T {
        self.pp.norm_sqr() + self.ps.norm_sqr() + self.sp.norm_sqr() + self.ss.norm_sqr()
    }
}

/// Relative singularity threshold for [`solve2x2`].
pub const DET_EPS: f64 = 1e-12;

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve2x2(a: &Jones, b: Vec2c) -> Result<Vec2c> {
    let scale = a.max_row_norm();
    let det = a.det().abs();
    if !(det > DET_EPS * scale * scale) {
        return Err(Error::Singular { det });
    }
    // rows: [pp ps | b.p], [sp ss | b.s]
    let (r0, r1, b0, b1) = if a.pp.abs() >= a.sp.abs() {
        ((a.pp, a.ps), (a.sp, a.ss), b.p, b.s)
    } else {
        ((a.sp, a.ss), (a.pp, a.ps), b.s, b.p)
    };
    let m = r1.0 / r0.0;
    let u11 = r1.1 - m * r0.1;
    let c1 = b1 - m * b0;
    let x1 = c1 / u11;
    let x0 = (b0 - r0.1 * x1) / r0.0;
    Ok(Vec2c::new(x0, x1))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct JonesRecord {
    pub pp: Complex64,
    pub ps: Complex64,
    pub sp: Complex64,
    pub ss: Complex64,
}

impl From<Jones> for JonesRecord {
    fn from(j: Jones) -> Self {
        Self {
            pp: j.pp,
            ps: j.ps,
            sp: j.sp,
            ss: j.ss,
        }
    }
}

impl From<JonesRecord> for Jones {
    fn from(j: JonesRecord) -> Self {
        Jones::new(j.pp, j.ps, j.sp, j.ss)
    }
}
