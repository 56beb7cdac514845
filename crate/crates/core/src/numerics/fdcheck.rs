//! Central finite-difference gradient checking.

use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct FdConfig {
    /// Step relative to `max(|x_i|, 1)`.
    pub step: f64,
    pub tol: f64,
    /// Absolute floor on the relative-error denominator.
    pub floor: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            tol: 1e-5,
            floor: 1e-8,
        }
    }
}

impl FdConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FdReport {
    pub max_rel_err: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
    pub pass: bool,
    /// First coordinate where `f` was not finite, if any.
    pub non_finite_at: Option<usize>,
}

/// Compare `grad` against central differences of `f` at `x`, coordinate
/// by coordinate. The per-coordinate error is
/// `max(|fd - g| - r, 0) / max(|fd|, |g|, floor)` where `r` bounds the
/// floating-point rounding of the difference quotient.
pub fn finite_diff_check<F>(mut f: F, grad: &[f64], x: &[f64], cfg: FdConfig) -> FdReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(grad.len(), x.len(), "gradient length mismatch");
    assert!(cfg.step > 0.0, "finite-difference step must be positive");
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    let mut worst_index = 0;
    for i in 0..x.len() {
        let h = cfg.step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return FdReport {
                max_rel_err: f64::INFINITY,
                worst_index: i,
                pass: false,
                non_finite_at: Some(i),
            };
        }
        let fd = (fp - fm) / (2.0 * h);
        // rounding error of the difference quotient is not a gradient error
        let roundoff = 8.0 * f64::EPSILON * fp.abs().max(fm.abs()) / (2.0 * h);
        let denom = fd.abs().max(grad[i].abs()).max(cfg.floor);
        let err = ((fd - grad[i]).abs() - roundoff).max(0.0) / denom;
        if err > worst || err.is_nan() {
            worst = if err.is_nan() { f64::INFINITY } else { err };
            worst_index = i;
        }
    }
    FdReport {
        max_rel_err: worst,
        worst_index,
        pass: worst <= cfg.tol,
        non_finite_at: None,
    }
}
