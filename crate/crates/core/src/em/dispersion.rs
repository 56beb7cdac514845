use serde::{Deserialize, Serialize};

use super::F_REF;
use crate::numerics::Real;

/// Power-law dispersion: `eps_r(f) = a (f/f_ref)^b`, `sigma(f) = c (f/f_ref)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Closed intervals for `(a, b, c, d)`, in that order.
pub const PARAM_BOUNDS: [(f64, f64); 4] = [(1.0, 15.0), (-0.5, 0.5), (0.0, 10.0), (-0.5, 0.5)];

impl DispersionParams {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn in_bounds(&self) -> bool {
        self.to_array()
            .iter()
            .zip(PARAM_BOUNDS)
            .all(|(v, (lo, hi))| (lo..=hi).contains(v))
    }

    pub fn eval(&self, f: f64) -> MaterialSample {
        let (eps_r, sigma, _) = eval_dispersion(self.to_array(), f);
        MaterialSample {
            eps_r,
            sigma,
            frequency: f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialSample {
    pub eps_r: f64,
    pub sigma: f64,
    pub frequency: f64,
}

/// Evaluate the power law at frequency `f` (Hz).
///
/// Returns `(eps_r, sigma, clamped)`; `eps_r` is clamped to at least 1 and
/// `clamped` reports whether that happened.
pub fn eval_dispersion<T: Real>(p: [T; 4], f: f64) -> (T, T, bool) {
    debug_assert!(f > 0.0);
    let lnf = (f / F_REF).ln();
    let [a, b, c, d] = p;
    let eps = a * (b * lnf).exp();
    let sigma = c * (d * lnf).exp();
    let clamped = eps.value() < 1.0;
    (eps.max_const(1.0), sigma, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exponents_are_flat() {
        let (e, s, clamped) = eval_dispersion([4.0, 0.0, 0.02, 0.0], 3.6e9);
        assert_eq!(e, 4.0);
        assert_eq!(s, 0.02);
        assert!(!clamped);
    }

    #[test]
    fn direct_power_law() {
        let (e, _, _) = eval_dispersion([3.2, 0.05, 0.0, 0.0], 2.4e9);
        let oracle = 3.2 * 2.4f64.powf(0.05);
        assert!((e - oracle).abs() < 1e-14);
        assert!((e - 3.343).abs() < 1e-3);
    }

    #[test]
    fn clamp_is_reported() {
        let (e, _, clamped) = eval_dispersion([1.0, -0.5, 0.0, 0.0], 5.8e9);
        assert_eq!(e, 1.0);
        assert!(clamped);
    }

    #[test]
    fn increasing_with_positive_exponent() {
        let p = [2.0, 0.1, 0.0, 0.0];
        let freqs: Vec<f64> = (0..50).map(|i| 2.4e9 + i as f64 * 0.07e9).collect();
        let eps: Vec<f64> = freqs.iter().map(|&f| eval_dispersion(p, f).0).collect();
        assert!(eps.windows(2).all(|w| w[1] > w[0]));
    }
}
