mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfinv::scene::{incidence_frame, perturb_normals, reflect, Scene, Vec3};
use rfinv::Error;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Independent nearest-hit oracle: triangle fan with barycentric tests.
fn brute_force_hit(scene: &Scene, o: &Vec3, d: &Vec3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in scene.facets.iter().enumerate() {
        let vs = &f.vertices;
        for k in 1..vs.len() - 1 {
            let (a, b, c) = (vs[0], vs[k], vs[k + 1]);
            let e1 = b - a;
            let e2 = c - a;
            let n = e1.cross(&e2);
            if d.dot(&n) >= 0.0 {
                continue;
            }
            // Moller-Trumbore
            let pvec = d.cross(&e2);
            let det = e1.dot(&pvec);
            let tvec = o - a;
            let u = tvec.dot(&pvec) / det;
            let qvec = tvec.cross(&e1);
            let v = d.dot(&qvec) / det;
            let t = e2.dot(&qvec) / det;
            if u < -1e-12 || v < -1e-12 || u + v > 1.0 + 1e-12 || t <= 1e-9 {
                continue;
            }
            if best.map_or(true, |(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
    }
    best
}

#[test]
fn shoebox_loads_with_three_materials() {
    let s = common::shoebox();
    assert_eq!(s.facets.len(), 6);
    assert_eq!(s.materials.len(), 3);
    let c = Vec3::new(2.5, 2.0, 1.5);
    for f in &s.facets {
        assert!((f.normal.norm() - 1.0).abs() < 1e-12);
        // normals face the interior
        assert!(f.signed_distance(&c) > 0.0);
    }
}

#[test]
fn single_wall_loads() {
    assert_eq!(common::single_wall().facets.len(), 1);
}

#[test]
fn missing_file_is_io_error() {
    let e = rfinv::scene::load_scene("/nonexistent/scene.json").unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn perpendicular_ray_hits_wall_center() {
    let s = common::single_wall();
    let o = Vec3::new(2.0, 0.5, 0.25);
    let hit = s.ray_intersect(&o, &-Vec3::x()).unwrap();
    assert_eq!(hit.facet_id, 0);
    assert!((hit.t - 2.0).abs() < 1e-15);
    assert!((hit.point - Vec3::new(0.0, 0.5, 0.25)).norm() < 1e-15);
}

#[test]
fn parallel_ray_misses() {
    let s = common::single_wall();
    assert!(s.ray_intersect(&Vec3::new(2.0, 0.0, 0.0), &Vec3::y()).is_none());
}

#[test]
fn ray_intersect_matches_brute_force() {
    let s = common::shoebox();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // diagonal ray first
    let diag = Vec3::new(5.0, 4.0, 3.0).normalize();
    let h = s.ray_intersect(&Vec3::new(0.01, 0.01, 0.01), &diag).unwrap();
    let (fid, t) = brute_force_hit(&s, &Vec3::new(0.01, 0.01, 0.01), &diag).unwrap();
    assert_eq!(h.facet_id, fid);
    assert!((h.t - t).abs() < 1e-9);
    for _ in 0..10_000 {
        let o = Vec3::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..3.0));
        let d = random_unit(&mut rng);
        let got = s.ray_intersect(&o, &d);
        let want = brute_force_hit(&s, &o, &d);
        match (got, want) {
            (Some(h), Some((fid, t))) => {
                assert!((h.t - t).abs() < 1e-9 * t.max(1.0));
                if h.facet_id != fid {
                    // ties only at shared edges
                    assert!((h.t - t).abs() < 1e-9);
                }
            }
            (None, None) => {}
            other => panic!("disagreement {other:?} for o={o:?} d={d:?}"),
        }
    }
}

#[test]
fn incidence_frames_are_orthonormal_and_specular() {
    let s = common::shoebox();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let f = &s.facets[rng.gen_range(0..s.facets.len())];
        let mut d = random_unit(&mut rng);
        if d.dot(&f.normal) > 0.0 {
            d = -d;
        }
        if d.dot(&f.normal).abs() < 1e-6 {
            continue;
        }
        let fr = incidence_frame(f, f.centroid(), &d).unwrap();
        for (a, b) in [
            (fr.s_hat, f.normal),
            (fr.s_hat, d),
            (fr.p_hat_in, d),
            (fr.p_hat_in, fr.s_hat),
            (fr.p_hat_out, fr.reflected_dir),
            (fr.p_hat_out, fr.s_hat),
        ] {
            worst = worst.max(a.dot(&b).abs());
        }
        for v in [fr.s_hat, fr.p_hat_in, fr.p_hat_out, fr.reflected_dir] {
            worst = worst.max((v.norm() - 1.0).abs());
        }
        assert!((fr.s_hat.cross(&fr.p_hat_in) - d).norm() < 1e-12);
        assert!((fr.s_hat.cross(&fr.p_hat_out) - fr.reflected_dir).norm() < 1e-12);
        let r = reflect(&d, &f.normal);
        let out_angle = r.dot(&f.normal).clamp(-1.0, 1.0).acos();
        assert!((out_angle - fr.theta_i).abs() < 1e-12 || fr.theta_i < 1e-6);
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn perturb_zero_is_identity() {
    let s = common::shoebox();
    assert_eq!(perturb_normals(&s, 0.0, 3), s);
}

#[test]
fn perturb_is_deterministic_and_bounded() {
    let s = common::shoebox();
    assert_eq!(perturb_normals(&s, 0.02, 9), perturb_normals(&s, 0.02, 9));
    let std = 1f64.to_radians();
    let mut max_dev: f64 = 0.0;
    for seed in 0..1700 {
        let p = perturb_normals(&s, std, seed);
        for (a, b) in s.facets.iter().zip(&p.facets) {
            assert!((b.normal.norm() - 1.0).abs() < 1e-12);
            assert_eq!(a.plane_normal(), b.plane_normal());
            max_dev = max_dev.max(a.normal.dot(&b.normal).clamp(-1.0, 1.0).acos());
        }
    }
    // >= 10^4 draws, none beyond 5 sigma
    assert!(max_dev < 5.0 * std, "{max_dev}");
    assert!(max_dev > 1.0 * std);
}
