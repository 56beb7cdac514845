use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Scene;

/// Tilt every facet's prior normal by `|N(0, angle_std^2)|` radians about
/// a uniformly random in-plane axis. The plane itself is unchanged, so
/// only incidence geometry derived from the prior is affected.
pub fn perturb_normals(scene: &Scene, angle_std: f64, seed: u64) -> Scene {
    assert!(angle_std >= 0.0, "angle_std must be non-negative");
    let mut out = scene.clone();
    if angle_std == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, angle_std).expect("finite std");
    for f in &mut out.facets {
        let n = f.normal;
        let t1 = {
            let e = f.first_edge();
            (e - n * e.dot(&n)).normalize()
        };
        let t2 = n.cross(&t1);
        let angle: f64 = normal.sample(&mut rng).abs();
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let axis = t1 * phi.cos() + t2 * phi.sin();
        f.normal = (n * angle.cos() + axis.cross(&n) * angle.sin()).normalize();
    }
    out
}
