mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfinv::field::{
    field_forward, field_forward_grad, field_loss, field_loss_grad, field_reg, field_samples, load_field_checkpoint,
    save_field_checkpoint, train_field, FieldCheckpoint, FieldNet, FieldNetConfig, FieldSample, FieldTrainConfig,
};
use rfinv::nn::Activation;
use rfinv::numerics::{finite_diff_check, Complex64, FdConfig, Vec2c};
use rfinv::scene::{Aabb, Vec3};

fn small_net(seed: u64) -> FieldNet {
    let scene = common::shoebox();
    let cfg = FieldNetConfig {
        pe_levels_x: 2,
        pe_levels_d: 1,
        hidden_width: 8,
        hidden_depth: 2,
        activation: Activation::Silu,
    };
    FieldNet::new(cfg, scene.bounds, scene.tx.position, seed)
}

fn random_point(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec3 {
    Vec3::from_fn(|i, _| rng.gen_range(b.min[i]..b.max[i]))
}

fn random_dir(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize()
}

fn random_batch(rng: &mut ChaCha8Rng, net: &FieldNet, n: usize) -> Vec<FieldSample> {
    (0..n)
        .map(|_| FieldSample {
            x: random_point(rng, &net.bounds),
            d: random_dir(rng),
            f: rng.gen_range(2.4e9..5.8e9),
            e: Vec2c::new(
                Complex64::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)),
                Complex64::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)),
            ),
        })
        .collect()
}

#[test]
fn forward_is_finite_and_deterministic() {
    let net = small_net(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = random_point(&mut rng, &net.bounds);
        let d = random_dir(&mut rng);
        let a = field_forward(&net, &x, &d, 3e9).unwrap();
        let b = field_forward(&net, &x, &d, 3e9).unwrap();
        assert!(a.is_finite());
        assert_eq!(a, b);
    }
}

#[test]
fn forward_rejects_bad_queries() {
    let net = small_net(1);
    let out = Vec3::new(-1.0, 1.0, 1.0);
    assert!(field_forward(&net, &out, &Vec3::x(), 3e9).is_err());
    assert!(field_forward(&net, &Vec3::new(1.0, 1.0, 1.0), &Vec3::new(1.0, 1.0, 0.0), 3e9).is_err());
}

#[test]
fn forward_weight_gradient_matches_finite_differences() {
    let net = small_net(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let x = random_point(&mut rng, &net.bounds);
        let d = random_dir(&mut rng);
        let f = rng.gen_range(2.4e9..5.8e9);
        let w = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        let g = field_forward_grad(&net, &x, &d, f, w).unwrap();
        let scalar = |p: &[f64]| {
            let e = field_forward(&net.with_params(p.to_vec()).unwrap(), &x, &d, f).unwrap();
            w[0] * e.p.re + w[1] * e.p.im + w[2] * e.s.re + w[3] * e.s.im
        };
        let r = finite_diff_check(scalar, &g, net.params(), FdConfig::with_tol(1e-4));
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let net = small_net(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let batch = random_batch(&mut rng, &net, 16);
    let (_, g) = field_loss_grad(&net, &batch).unwrap();
    let loss = |p: &[f64]| field_loss(&net.with_params(p.to_vec()).unwrap(), &batch).unwrap();
    let r = finite_diff_check(loss, &g, net.params(), FdConfig::with_tol(1e-4));
    assert!(r.pass, "{r:?}");
}

#[test]
fn loss_is_zero_on_own_predictions() {
    let net = small_net(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut batch = random_batch(&mut rng, &net, 32);
    for s in &mut batch {
        s.e = field_forward(&net, &s.x, &s.d, s.f).unwrap();
    }
    assert!(field_loss(&net, &batch).unwrap() < 1e-30);
}

#[test]
fn loss_is_one_for_unit_output_and_zero_target() {
    let net = small_net(9);
    let f = 3e9;
    let r = 1.5;
    let tx = net.tx_position;
    let k = net.carrier(&(tx + Vec3::new(r, 0.0, 0.0)), f).unwrap();
    // zero the head and set the bias so that |A k| = 1 at distance r
    let mut p = net.params().to_vec();
    let n = p.len();
    let head = 4 * net.config.hidden_width + 4;
    for v in &mut p[n - head..] {
        *v = 0.0;
    }
    p[n - 4] = 1.0 / k.abs();
    let net = net.with_params(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut batch = Vec::new();
    while batch.len() < 20 {
        let d = random_dir(&mut rng);
        let x = tx + d * r;
        if net.contains(&x) {
            batch.push(FieldSample {
                x,
                d,
                f,
                e: Vec2c::ZERO,
            });
        }
    }
    assert!((field_loss(&net, &batch).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn loss_matches_naive_summation() {
    let net = small_net(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let batch = random_batch(&mut rng, &net, 64);
    let mut total = 0.0;
    for s in &batch {
        let e = field_forward(&net, &s.x, &s.d, s.f).unwrap();
        let diff = [e.p - s.e.p, e.s - s.e.s];
        for c in diff {
            total += c.re * c.re + c.im * c.im;
        }
    }
    let naive = total / batch.len() as f64;
    let got = field_loss(&net, &batch).unwrap();
    assert!((got - naive).abs() <= 1e-12 * naive.max(1e-30), "{got} vs {naive}");
}

#[test]
fn reg_is_zero_for_constant_output() {
    let net = small_net(13);
    let mut p = net.params().to_vec();
    let n = p.len();
    let head = 4 * net.config.hidden_width + 4;
    for v in &mut p[n - head..n - 4] {
        *v = 0.0;
    }
    let net = net.with_params(p).unwrap();
    let pts = vec![(Vec3::new(2.0, 2.0, 1.5), Vec3::z()); 4];
    assert_eq!(field_reg(&net, &pts, 1e-3).unwrap().value, 0.0);
}

/// A ReLU net with positive weights on non-negative inputs never leaves the
/// linear region, so its output is exactly `J x + c` and the central
/// difference recovers `|J|_F^2` up to rounding.
#[test]
fn reg_recovers_slope_of_linear_net() {
    let scene = common::shoebox();
    let cfg = FieldNetConfig {
        pe_levels_x: 0,
        pe_levels_d: 0,
        hidden_width: 5,
        hidden_depth: 2,
        activation: Activation::Relu,
    };
    let net = FieldNet::new(cfg, scene.bounds, scene.tx.position, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p: Vec<f64> = (0..net.n_params()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let net = net.with_params(p.clone()).unwrap();
    // layers: 6 -> 5 -> 5 -> 4, column-major weights then bias
    let dims = [(6, 5), (5, 5), (5, 4)];
    let mut off = 0;
    let mut jac = DMatrix::<f64>::identity(6, 6);
    for (n_in, n_out) in dims {
        let w = DMatrix::from_column_slice(n_out, n_in, &p[off..off + n_in * n_out]);
        off += n_in * n_out + n_out;
        jac = w * jac;
    }
    let e = scene.bounds.extent();
    let scale = 1.0 / e.x.max(e.y).max(e.z);
    let slope = jac.columns(0, 3) * scale;
    let expected = slope.norm_squared();
    let d = Vec3::new(0.3, 0.4, 0.5).normalize().map(f64::abs);
    let pts: Vec<(Vec3, Vec3)> = (0..10).map(|_| (random_point(&mut rng, &scene.bounds).map(|v| v.clamp(0.01, 2.9)), d)).collect();
    let r = field_reg(&net, &pts, 1e-3).unwrap();
    assert_eq!(r.skipped, 0);
    assert!((r.value - expected).abs() < 1e-8 * expected, "{} vs {}", r.value, expected);
}

#[test]
fn reg_converges_quadratically_in_step() {
    let net = small_net(16);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pts: Vec<(Vec3, Vec3)> = (0..20)
        .map(|_| {
            let x = Vec3::new(rng.gen_range(1.0..4.0), rng.gen_range(1.0..3.0), rng.gen_range(0.8..2.2));
            (x, random_dir(&mut rng))
        })
        .collect();
    let r: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| field_reg(&net, &pts, h).unwrap().value).collect();
    let ratio = (r[0] - r[1]) / (r[1] - r[2]);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn reg_skips_points_near_the_boundary() {
    let net = small_net(18);
    let pts = vec![(Vec3::new(0.0, 2.0, 1.0), Vec3::x()), (Vec3::new(2.0, 2.0, 1.0), Vec3::x())];
    assert_eq!(field_reg(&net, &pts, 1e-3).unwrap().skipped, 1);
}

fn short_training(lambda_reg: f64) -> (FieldNet, Vec<FieldSample>) {
    let scene = common::shoebox();
    let samples = field_samples(&scene, None, 600, &[2.4e9, 4.1e9, 5.8e9], 3);
    let net = FieldNet::new(FieldNetConfig::default(), scene.bounds, scene.tx.position, 4);
    let cfg = FieldTrainConfig {
        epochs: 30,
        batch: 128,
        lambda_reg,
        ..FieldTrainConfig::default()
    };
    let (net, report, _) = train_field(net, &samples, &cfg, 0, None).unwrap();
    assert!(report.aborted.is_none());
    assert_eq!(report.history.len(), 30);
    (net, samples)
}

#[test]
fn training_is_deterministic_and_freezes() {
    let (a, _) = short_training(1e-3);
    let (b, _) = short_training(1e-3);
    assert_eq!(a.params(), b.params());
    assert!(a.is_frozen());
}

#[test]
fn training_reduces_loss_and_total_decomposes() {
    let scene = common::shoebox();
    let samples = field_samples(&scene, None, 600, &[2.4e9, 4.1e9, 5.8e9], 3);
    let net = FieldNet::new(FieldNetConfig::default(), scene.bounds, scene.tx.position, 4);
    let before = field_loss(&net, &samples).unwrap();
    let cfg = FieldTrainConfig {
        epochs: 30,
        batch: 128,
        ..FieldTrainConfig::default()
    };
    let (net, report, _) = train_field(net, &samples, &cfg, 0, None).unwrap();
    assert!(field_loss(&net, &samples).unwrap() < 0.1 * before);
    for e in &report.history {
        assert_eq!(e.total, e.field_loss + cfg.lambda_reg * e.reg);
    }
}

#[test]
fn regularization_lowers_probe_smoothness() {
    let (plain, _) = short_training(0.0);
    let (smooth, _) = short_training(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let probe: Vec<(Vec3, Vec3)> = (0..200)
        .map(|_| {
            let x = Vec3::new(rng.gen_range(0.5..4.5), rng.gen_range(0.5..3.5), rng.gen_range(0.5..2.5));
            (x, random_dir(&mut rng))
        })
        .collect();
    let a = field_reg(&plain, &probe, 1e-3).unwrap().value;
    let b = field_reg(&smooth, &probe, 1e-3).unwrap().value;
    assert!(b < a, "regularized {b} vs plain {a}");
}

#[test]
fn checkpoint_round_trip_preserves_weights() {
    let scene = common::shoebox();
    let samples = field_samples(&scene, None, 100, &[2.4e9], 3);
    let net = FieldNet::new(FieldNetConfig::default(), scene.bounds, scene.tx.position, 4);
    let cfg = FieldTrainConfig {
        epochs: 2,
        ..FieldTrainConfig::default()
    };
    let (net, report, adam) = train_field(net, &samples, &cfg, 0, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.json");
    save_field_checkpoint(&FieldCheckpoint::new(&net, &cfg, &report, Some(adam)), &path).unwrap();
    let back = load_field_checkpoint(&path).unwrap();
    let restored = back.network().unwrap();
    assert_eq!(restored.params(), net.params());
    assert!(restored.is_frozen());
    assert_eq!(back.epochs_completed, 2);
}
