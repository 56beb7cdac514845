//! Closed-form electromagnetic relations: dispersion, impedance,
//! refraction, Fresnel reflection, Jones assembly and free-space
//! propagation. Everything is generic over [`crate::numerics::Real`] so it
//! can be evaluated plainly or recorded on a gradient tape.

mod dispersion;
mod fresnel;
mod propagation;

pub use dispersion::{eval_dispersion, DispersionParams, MaterialSample, PARAM_BOUNDS};
pub use fresnel::{
    assemble_jones, fresnel_coefficients, intrinsic_impedance, refractive_index, snell_cos_theta_t,
    GRAZING_LIMIT,
};
pub use propagation::{
    capture, fspl_db, inverse_propagate, propagate, propagation_factor, propagation_factor_t, UNIT_TOL,
};

use std::f64::consts::PI;

use crate::error::Result;
use crate::numerics::{Complex, Jones2x2, Real};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 2.997_924_58e8;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0 * PI * 1e-7;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Frequency normalization inside the dispersion power law, Hz.
pub const F_REF: f64 = 1e9;
/// Impedance of free space, ohms.
pub const ETA0: f64 = 376.730_313_564_320_2;

pub fn omega(f: f64) -> f64 {
    2.0 * PI * f
}

/// Diagonal reflection Jones matrix of an air/material interface with
/// power-law parameters `p = (a, b, c, d)` at incidence `theta_i` and
/// frequency `f`.
pub fn reflection_jones<T: Real>(p: [T; 4], theta_i: f64, f: f64) -> Result<Jones2x2<T>> {
    let w = omega(f);
    let (eps_r, sigma, _) = eval_dispersion(p, f);
    let one = eps_r.lift(1.0);
    let zero = eps_r.lift(0.0);
    let eta1 = intrinsic_impedance(one, zero, w);
    let eta2 = intrinsic_impedance(eps_r, sigma, w);
    let n1 = Complex::real(one);
    let n2 = refractive_index(eps_r, sigma, w);
    let cos_t = snell_cos_theta_t(n1, n2, theta_i);
    let (r_p, r_s) = fresnel_coefficients(eta1, eta2, theta_i, cos_t)?;
    let z = Complex::real(zero);
    Ok(assemble_jones(r_p, r_s, z, z))
}
