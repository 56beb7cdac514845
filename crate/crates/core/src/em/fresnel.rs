//! Impedance, refraction and reflection coefficients.

use super::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::numerics::{Complex, Jones2x2, Real};

/// Incidence angles at or beyond this are rejected as grazing.
pub const GRAZING_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-9;

/// `eta = sqrt(j omega mu0 / (sigma + j omega eps0 eps_r))`, in ohms.
pub fn intrinsic_impedance<T: Real>(eps_r: T, sigma: T, omega: f64) -> Complex<T> {
    let num = Complex::new(eps_r.lift(0.0), eps_r.lift(omega * MU0));
    let den = Complex::new(sigma, eps_r * (omega * EPS0));
    (num / den).sqrt()
}

/// Complex refractive index `n = sqrt(eps_r - j sigma / (omega eps0))`.
pub fn refractive_index<T: Real>(eps_r: T, sigma: T, omega: f64) -> Complex<T> {
    Complex::new(eps_r, -(sigma / (omega * EPS0))).sqrt()
}

/// `cos(theta_t)` from Snell's law, on the branch whose transmitted wave
/// decays into medium 2 (time dependence `exp(+j omega t)`).
pub fn snell_cos_theta_t<T: Real>(n1: Complex<T>, n2: Complex<T>, theta_i: f64) -> Complex<T> {
    let sin_i = theta_i.sin();
    let ratio = n1 / n2;
    let r2 = ratio * ratio;
    let one = Complex::real(n1.re.lift(1.0));
    let arg = one - r2.scale_f64(sin_i * sin_i);
    let w = arg.sqrt();
    // growing solution: Im(k2 cos t) > 0; flip to the decaying one
    if (n2 * w).value().im > 0.0 {
        -w
    } else {
        w
    }
}

/// Reflection coefficients `(r_p, r_s)` in impedance form:
///
/// `r_p = (eta2 cos_t - eta1 cos_i) / (eta2 cos_t + eta1 cos_i)`,
/// `r_s = (eta1 cos_t - eta2 cos_i) / (eta1 cos_t + eta2 cos_i)`.
///
/// At normal incidence `r_p = -r_s = (eta2 - eta1) / (eta2 + eta1)`, and
/// `r_p` vanishes at the Brewster angle of a lossless contrast.
pub fn fresnel_coefficients<T: Real>(
    eta1: Complex<T>,
    eta2: Complex<T>,
    theta_i: f64,
    cos_t: Complex<T>,
) -> Result<(Complex<T>, Complex<T>)> {
    if !(0.0..GRAZING_LIMIT).contains(&theta_i) {
        return Err(Error::domain(format!(
            "incidence angle {theta_i} rad outside [0, pi/2)"
        )));
    }
    let cos_i = theta_i.cos();
    let a = eta2 * cos_t;
    let b = eta1.scale_f64(cos_i);
    let r_p = (a - b) / (a + b);
    let c = eta1 * cos_t;
    let d = eta2.scale_f64(cos_i);
    let r_s = (c - d) / (c + d);
    Ok((r_p, r_s))
}

/// `[[r_p, r_ps], [r_sp, r_s]]`.
pub fn assemble_jones<T: Real>(
    r_p: Complex<T>,
    r_s: Complex<T>,
    r_ps: Complex<T>,
    r_sp: Complex<T>,
) -> Jones2x2<T> {
    Jones2x2::new(r_p, r_ps, r_sp, r_s)
}
