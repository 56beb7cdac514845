//! Free-space propagation between a surface point and a receiver.

use std::f64::consts::PI;

use super::C0;
use crate::error::{Error, Result};
use crate::numerics::{Complex, Complex64, ComplexVec2, Real};

/// Free-space path loss `20 log10(4 pi d f / c)` in dB.
pub fn fspl_db(d: f64, f: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(20.0 * (4.0 * PI * d * f / C0).log10())
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("propagation distance {d} m must be positive")))
    }
}

/// `10^(-PL/20) exp(-j 2 pi d f / c)`. The phase is reduced modulo one
/// cycle before the trigonometric evaluation.
pub fn propagation_factor(d: f64, f: f64) -> Result<Complex64> {
    check_distance(d)?;
    let cycles = d * f / C0;
    let phase = 2.0 * PI * (cycles - cycles.floor());
    let amp = C0 / (4.0 * PI * d * f);
    Ok(Complex64::from_polar(amp, -phase))
}

/// Taped variant of [`propagation_factor`], differentiable in `d`.
pub fn propagation_factor_t<T: Real>(d: T, f: f64) -> Result<Complex<T>> {
    check_distance(d.value())?;
    let cycles = d * (f / C0);
    let phase = (cycles - cycles.value().floor()) * (2.0 * PI);
    let amp = d.lift(C0 / (4.0 * PI * f)) / d;
    Ok(Complex::new(amp * phase.cos(), -(amp * phase.sin())))
}

pub fn propagate<T: Real>(e: ComplexVec2<T>, d: f64, f: f64) -> Result<ComplexVec2<T>> {
    let k = propagation_factor(d, f)?;
    Ok(ComplexVec2::new(e.p.mul_const(k), e.s.mul_const(k)))
}

/// Exact algebraic inverse of [`propagate`].
pub fn inverse_propagate<T: Real>(e: ComplexVec2<T>, d: f64, f: f64) -> Result<ComplexVec2<T>> {
    check_distance(d)?;
    let cycles = d * f / C0;
    let phase = 2.0 * PI * (cycles - cycles.floor());
    let inv = Complex64::from_polar(4.0 * PI * d * f / C0, phase);
    Ok(ComplexVec2::new(e.p.mul_const(inv), e.s.mul_const(inv)))
}

/// Unit-norm tolerance for receiver polarization vectors.
pub const UNIT_TOL: f64 = 1e-12;

/// Receiver capture: unconjugated dot product `h_rx . E`.
pub fn capture<T: Real>(e: ComplexVec2<T>, h_rx: ComplexVec2<f64>) -> Result<Complex<T>> {
    let n = h_rx.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Validation(vec![format!(
            "receiver polarization must be unit norm, got {n}"
        )]));
    }
    Ok(e.p.mul_const(h_rx.p) + e.s.mul_const(h_rx.s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Vec2c;

    #[test]
    fn fspl_reference_value() {
        let pl = fspl_db(1.0, 2.4e9).unwrap();
        let oracle = 20.0 * (4.0 * PI * 2.4e9 / 299_792_458.0f64).log10();
        assert!((pl - oracle).abs() < 1e-12);
        assert!((pl - 40.05).abs() < 0.01, "{pl}");
    }

    #[test]
    fn fspl_zero_and_doubling() {
        let f = 3.0e9;
        let d0 = C0 / (4.0 * PI * f);
        assert!(fspl_db(d0, f).unwrap().abs() < 1e-12);
        let diff = fspl_db(7.0, f).unwrap() - fspl_db(3.5, f).unwrap();
        assert!((diff - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((diff - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn fspl_rejects_nonpositive_distance() {
        assert!(fspl_db(0.0, 1e9).is_err());
        assert!(propagate(Vec2c::ZERO, -1.0, 1e9).is_err());
        assert!(inverse_propagate(Vec2c::ZERO, 0.0, 1e9).is_err());
    }

    #[test]
    fn propagate_one_metre() {
        let e = propagate(Vec2c::real(1.0, 0.0), 1.0, 2.4e9).unwrap();
        let pl = fspl_db(1.0, 2.4e9).unwrap();
        assert!((e.p.abs() - 10f64.powf(-pl / 20.0)).abs() < 1e-15);
        assert!((e.p.abs() - 9.947e-3).abs() < 1e-5);
        let cycles = 2.4e9 / C0;
        let expected = -2.0 * PI * (cycles - cycles.floor());
        assert!((e.p.arg() - expected).abs() < 1e-12);
        assert_eq!(e.s, Complex64::ZERO);
    }

    #[test]
    fn identity_when_loss_and_phase_vanish() {
        // amplitude 1 needs d = c/(4 pi f); pick f so that d f / c is an integer
        let f = C0 / (4.0 * PI) * (4.0 * PI);
        let d = C0 / (4.0 * PI * f);
        let k = propagation_factor(d, f).unwrap();
        assert!((k.abs() - 1.0).abs() < 1e-14);
        let e = Vec2c::new(Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.5));
        let out = propagate(e, d, f).unwrap();
        let cycles = d * f / C0;
        let rot = Complex64::from_polar(1.0, -2.0 * PI * (cycles - cycles.floor()));
        assert!((out.p - e.p * rot).abs() < 1e-14);
    }

    #[test]
    fn back_lift_of_scalar_csi() {
        let (d, f) = (4.2, 5.1e9);
        let c_obs = Complex64::new(1.2e-3, -4.0e-4);
        let lifted = inverse_propagate(Vec2c::new(c_obs, Complex64::ZERO), d, f).unwrap();
        let pl = fspl_db(d, f).unwrap();
        let phi = 2.0 * PI * d * f / C0;
        let oracle = c_obs * Complex64::from_polar(10f64.powf(pl / 20.0), phi);
        assert!((lifted.p - oracle).abs() < 1e-9 * oracle.abs());
        let zero = inverse_propagate(Vec2c::ZERO, d, f).unwrap();
        assert_eq!(zero, Vec2c::ZERO);
    }

    #[test]
    fn capture_projections() {
        let z = Complex64::new(0.5, 1.0);
        let w = Complex64::new(-2.0, 0.25);
        let e = Vec2c::new(z, w);
        assert_eq!(capture(e, Vec2c::real(1.0, 0.0)).unwrap(), z);
        assert_eq!(capture(e, Vec2c::real(0.0, 1.0)).unwrap(), w);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = capture(Vec2c::real(1.0, -1.0), Vec2c::real(h, h)).unwrap();
        assert!(c.abs() < 1e-16);
        assert!(capture(e, Vec2c::real(1.0, 1.0)).is_err());
    }
}
