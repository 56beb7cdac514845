mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfinv::config::EvalSection;
use rfinv::em::{DispersionParams, MaterialSample};
use rfinv::metrics::{
    abcd_mae, emit_grid_csv, emit_report, facet_eval_points, material_grid, material_mre, report_to_string,
    resimulate_and_score, score_materials, EvalReport, ReportFormat, SIGMA_FLOOR,
};
use rfinv::pipeline::{evaluate_model, GroundTruth, MaterialModel, ReportContext};
use rfinv::scene::Scene;
use rfinv::simulator::{generate_dataset, Dataset, SimConfig};
use rfinv::Error;

fn sample(eps_r: f64, sigma: f64) -> MaterialSample {
    MaterialSample {
        eps_r,
        sigma,
        frequency: 4e9,
    }
}

fn small_dataset(scene: &Scene, n_rx: usize) -> Dataset {
    let sim = SimConfig {
        n_rx,
        freqs_hz: vec![2.4e9, 4.1e9, 5.8e9],
        seed: 8,
        ..SimConfig::default()
    };
    generate_dataset(scene, &sim).unwrap()
}

#[test]
fn ten_percent_overestimate_gives_point_one() {
    let gt = vec![sample(4.0, 0.05), sample(6.5, 1.2), sample(2.0, 0.3)];
    let pred: Vec<_> = gt.iter().map(|s| sample(1.1 * s.eps_r, 1.1 * s.sigma)).collect();
    let r = material_mre(&pred, &gt).unwrap();
    assert!((r.eps_mre - 0.1).abs() < 1e-12);
    assert!((r.sigma_mre - 0.1).abs() < 1e-12);
    assert_eq!(r.sigma_floored, 0);
    assert_eq!(r.sigma_floored_abs_err, None);
}

#[test]
fn mre_matches_naive_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gt: Vec<_> = (0..200)
        .map(|_| sample(rng.gen_range(1.0..15.0), rng.gen_range(0.0..2.0)))
        .collect();
    let pred: Vec<_> = (0..200)
        .map(|_| sample(rng.gen_range(1.0..15.0), rng.gen_range(0.0..2.0)))
        .collect();
    let r = material_mre(&pred, &gt).unwrap();
    let (mut e, mut s) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(&gt) {
        e += ((p.eps_r - g.eps_r) / g.eps_r).abs();
        s += (p.sigma - g.sigma).abs() / if g.sigma < SIGMA_FLOOR { SIGMA_FLOOR } else { g.sigma };
    }
    assert!((r.eps_mre - e / 200.0).abs() < 1e-12);
    assert!((r.sigma_mre - s / 200.0).abs() < 1e-12);
}

#[test]
fn zero_conductivity_is_floored_and_counted() {
    let r = material_mre(&[sample(4.0, 2e-4)], &[sample(4.0, 0.0)]).unwrap();
    assert!((r.sigma_mre - 0.2).abs() < 1e-12);
    assert_eq!(r.sigma_floored, 1);
    assert!((r.sigma_floored_abs_err.unwrap() - 2e-4).abs() < 1e-18);
}

#[test]
fn mismatched_or_empty_inputs_are_rejected() {
    assert!(material_mre(&[], &[]).is_err());
    assert!(material_mre(&[sample(1.0, 0.0)], &[]).is_err());
    assert!(abcd_mae(&[], &[]).is_err());
}

#[test]
fn abcd_shift_by_half() {
    let gt = vec![DispersionParams::new(4.0, 0.0, 1.0, 0.1), DispersionParams::new(6.0, -0.2, 0.5, 0.0)];
    let pred: Vec<_> = gt
        .iter()
        .map(|p| {
            let a = p.to_array();
            DispersionParams::new(a[0] + 0.5, a[1] - 0.5, a[2] + 0.5, a[3] - 0.5)
        })
        .collect();
    assert!((abcd_mae(&pred, &gt).unwrap() - 0.5).abs() < 1e-15);
}

proptest! {
    #[test]
    fn sigma_mre_is_scale_invariant(
        vals in prop::collection::vec((0.01f64..5.0, 0.01f64..5.0), 1..20),
        k in 1.0f64..100.0,
    ) {
        let gt: Vec<_> = vals.iter().map(|v| sample(3.0, v.0)).collect();
        let pred: Vec<_> = vals.iter().map(|v| sample(3.0, v.1)).collect();
        let gk: Vec<_> = gt.iter().map(|s| sample(3.0, k * s.sigma)).collect();
        let pk: Vec<_> = pred.iter().map(|s| sample(3.0, k * s.sigma)).collect();
        let a = material_mre(&pred, &gt).unwrap().sigma_mre;
        let b = material_mre(&pk, &gk).unwrap().sigma_mre;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn mre_is_non_negative_and_zero_on_identity(e in 1.0f64..15.0, s in 0.0f64..3.0) {
        let r = material_mre(&[sample(e, s)], &[sample(e, s)]).unwrap();
        prop_assert_eq!(r.eps_mre, 0.0);
        prop_assert_eq!(r.sigma_mre, 0.0);
    }
}

#[test]
fn per_material_scores_split_by_facet_material() {
    let scene = common::shoebox();
    let pts = facet_eval_points(&scene, 16, 1);
    assert_eq!(pts.len(), 6 * 16);
    let exact: Vec<_> = pts.iter().map(|p| scene.material_of(p.facet_id)).collect();
    let (all, per) = score_materials(&scene, &pts, &exact, &[2.4e9, 5.8e9]).unwrap();
    assert_eq!(all.eps_mre, 0.0);
    assert_eq!(per.len(), 3);
    assert_eq!(per.values().map(|m| m.n_points).sum::<usize>(), pts.len());
}

#[test]
fn ground_truth_resimulation_is_exact() {
    let scene = common::shoebox();
    let ds = small_dataset(&scene, 15);
    let r = resimulate_and_score(&scene, &ds, &|fid, _| scene.material_of(fid)).unwrap();
    assert!(r.n_records > 0);
    assert_eq!(r.resim_error_db, 0.0);
}

#[test]
fn resimulation_error_grows_with_permittivity_error() {
    let scene = common::single_wall();
    let ds = small_dataset(&scene, 20);
    let truth = scene.material_of(0).to_array();
    let mut last = -1.0;
    for da in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let p = DispersionParams::new(truth[0] + da, truth[1], truth[2], truth[3]);
        let r = resimulate_and_score(&scene, &ds, &|_, _| p).unwrap();
        assert!(r.resim_error_db > last, "{da}: {} after {last}", r.resim_error_db);
        last = r.resim_error_db;
    }
}

struct Scaled(f64);

impl MaterialModel for Scaled {
    fn materials(&self, scene: &Scene, points: &[rfinv::metrics::EvalPoint]) -> rfinv::Result<Vec<DispersionParams>> {
        Ok(points
            .iter()
            .map(|p| {
                let a = scene.material_of(p.facet_id).to_array();
                DispersionParams::new(a[0] * self.0, a[1], a[2], a[3])
            })
            .collect())
    }
}

fn report(scene: &Scene, ds: &Dataset) -> EvalReport {
    let eval = EvalSection {
        points_per_facet: 32,
        ..EvalSection::default()
    };
    let ctx = ReportContext {
        config_id: "test".into(),
        seeds: [("eval".to_string(), 0u64)].into_iter().collect(),
        provenance: "unit".into(),
    };
    evaluate_model(scene, ds, &Scaled(1.05), vec![Some(0.1), None, Some(1e-3)], &eval, &ctx).unwrap()
}

#[test]
fn reports_are_byte_identical_and_round_trip() {
    let scene = common::shoebox();
    let ds = small_dataset(&scene, 10);
    let a = report(&scene, &ds);
    let b = report(&scene, &ds);
    assert!((a.eps_mre - 0.05).abs() < 1e-12);
    for fmt in [ReportFormat::Json, ReportFormat::Csv] {
        assert_eq!(report_to_string(&a, fmt).unwrap(), report_to_string(&b, fmt).unwrap());
    }
    let json = report_to_string(&a, ReportFormat::Json).unwrap();
    let back: EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
    assert!(json.contains("\"timestamp\": null"));
}

#[test]
fn csv_report_reparses_to_the_same_values() {
    let scene = common::shoebox();
    let ds = small_dataset(&scene, 10);
    let r = report(&scene, &ds);
    let text = report_to_string(&r, ReportFormat::Csv).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap(), vec!["metric", "value"]);
    let rows: Vec<(String, String)> = rd
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].to_string())
        })
        .collect();
    let get = |k: &str| rows.iter().find(|(m, _)| m == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!(get("eps_mre").parse::<f64>().unwrap(), r.eps_mre);
    assert_eq!(get("sigma_mre").parse::<f64>().unwrap(), r.sigma_mre);
    assert_eq!(get("per_frequency_nmse.1"), "");
    assert_eq!(get("per_material.glass.eps_mre").parse::<f64>().unwrap(), r.per_material["glass"].eps_mre);
    assert_eq!(get("n_eval_points"), (6 * 32).to_string());
}

#[test]
fn non_finite_metrics_are_numerical_errors() {
    let r = EvalReport {
        eps_mre: f64::NAN,
        ..EvalReport::default()
    };
    let e = report_to_string(&r, ReportFormat::Json).unwrap_err();
    assert!(matches!(e, Error::Numerical(_)));
    assert_eq!(e.exit_code(), 4);
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&r, dir.path().join("r.json"), ReportFormat::Json).is_err());
    let neg = EvalReport {
        sigma_mre: -1.0,
        ..EvalReport::default()
    };
    assert!(neg.validate().is_err());
}

#[test]
fn material_grid_covers_every_facet() {
    let scene = common::shoebox();
    let rows = material_grid(&scene, 32, 4e9, &|fid, _| scene.material_of(fid));
    assert_eq!(rows.len(), 6 * 1024);
    assert!(rows.iter().all(|r| r.eps_pred == r.eps_gt && r.sigma_pred == r.sigma_gt));
    assert!(rows.iter().all(|r| r.u > 0.0 && r.u < 1.0 && r.v > 0.0 && r.v < 1.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    emit_grid_csv(&rows, &path).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.records().count(), rows.len());
}

#[test]
fn ground_truth_model_scores_zero() {
    let scene = common::shoebox();
    let ds = small_dataset(&scene, 10);
    let ctx = ReportContext::default();
    let r = evaluate_model(&scene, &ds, &GroundTruth, Vec::new(), &EvalSection::default(), &ctx).unwrap();
    assert_eq!(r.eps_mre, 0.0);
    assert_eq!(r.sigma_mre, 0.0);
    assert_eq!(r.resim_error_db, Some(0.0));
}
