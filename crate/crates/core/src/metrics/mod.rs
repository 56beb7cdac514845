//! Material-map scores, re-simulation fidelity and report emission.

mod report;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::em::{capture, DispersionParams, MaterialSample};
use crate::error::{Error, Result};
use crate::scene::{Scene, Vec3};
use crate::simulator::{path_field_with, Dataset, PathKind};

pub use report::{
    emit_grid_csv, emit_report, material_grid, report_to_string, EvalReport, GridRow, ReportFormat, ReportMeta,
};

/// Denominator floor for conductivity relative errors, S/m.
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Records with a smaller ground-truth CSI magnitude are not scored.
pub const CSI_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub facet_id: usize,
    pub point: Vec3,
}

/// `per_facet` points drawn uniformly by area on every facet.
pub fn facet_eval_points(scene: &Scene, per_facet: usize, seed: u64) -> Vec<EvalPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scene
        .facets
        .iter()
        .enumerate()
        .flat_map(|(facet_id, f)| {
            (0..per_facet)
                .map(|_| EvalPoint {
                    facet_id,
                    point: f.sample_uniform(&mut rng),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Incidence angle of the direct transmitter ray at a facet point, or
/// `None` when the transmitter is behind the facet.
pub fn incidence_angle(scene: &Scene, p: &EvalPoint) -> Option<f64> {
    let n = scene.facets[p.facet_id].normal;
    let d = (p.point - scene.tx.position).normalize();
    let c = -d.dot(&n);
    (c > 0.0).then(|| c.min(1.0).acos())
}

/// `(eps_r, sigma)` of each parameter set at each frequency, point-major.
pub fn sample_materials(params: &[DispersionParams], freqs_hz: &[f64]) -> Vec<MaterialSample> {
    params
        .iter()
        .flat_map(|p| freqs_hz.iter().map(move |&f| p.eval(f)))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MreReport {
    pub eps_mre: f64,
    pub sigma_mre: f64,
    /// Samples whose ground-truth conductivity was below the floor.
    pub sigma_floored: usize,
    /// Mean absolute conductivity error over the floored samples.
    pub sigma_floored_abs_err: Option<f64>,
}

/// Mean relative errors of permittivity and conductivity over aligned
/// samples; conductivity denominators are floored at [`SIGMA_FLOOR`].
pub fn material_mre(pred: &[MaterialSample], gt: &[MaterialSample]) -> Result<MreReport> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::domain("material_mre needs two non-empty aligned sample sets"));
    }
    let mut eps = 0.0;
    let mut sig = 0.0;
    let mut floored = 0;
    let mut floored_abs = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        eps += (p.eps_r - g.eps_r).abs() / g.eps_r.abs();
        let err = (p.sigma - g.sigma).abs();
        if g.sigma.abs() < SIGMA_FLOOR {
            floored += 1;
            floored_abs += err;
        }
        sig += err / g.sigma.abs().max(SIGMA_FLOOR);
    }
    let n = pred.len() as f64;
    Ok(MreReport {
        eps_mre: eps / n,
        sigma_mre: sig / n,
        sigma_floored: floored,
        sigma_floored_abs_err: (floored > 0).then(|| floored_abs / floored as f64),
    })
}

/// Mean over samples of the mean absolute error of `(a, b, c, d)`.
pub fn abcd_mae(pred: &[DispersionParams], gt: &[DispersionParams]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::domain("abcd_mae needs two non-empty aligned sets"));
    }
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let (p, g) = (p.to_array(), g.to_array());
            (0..4).map(|i| (p[i] - g[i]).abs()).sum::<f64>() / 4.0
        })
        .sum();
    Ok(total / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MaterialScores {
    pub eps_mre: f64,
    pub sigma_mre: f64,
    pub abcd_mae: f64,
    pub sigma_floored: usize,
    pub sigma_floored_abs_err: Option<f64>,
    pub n_points: usize,
}

fn scores(pred: &[DispersionParams], gt: &[DispersionParams], freqs_hz: &[f64]) -> Result<MaterialScores> {
    let m = material_mre(&sample_materials(pred, freqs_hz), &sample_materials(gt, freqs_hz))?;
    Ok(MaterialScores {
        eps_mre: m.eps_mre,
        sigma_mre: m.sigma_mre,
        abcd_mae: abcd_mae(pred, gt)?,
        sigma_floored: m.sigma_floored,
        sigma_floored_abs_err: m.sigma_floored_abs_err,
        n_points: pred.len(),
    })
}

/// Overall and per-material scores of predictions at evaluation points
/// against the scene's facet materials, over `freqs_hz`.
pub fn score_materials(
    scene: &Scene,
    points: &[EvalPoint],
    pred: &[DispersionParams],
    freqs_hz: &[f64],
) -> Result<(MaterialScores, BTreeMap<String, MaterialScores>)> {
    if points.len() != pred.len() {
        return Err(Error::domain("one prediction per evaluation point required"));
    }
    let gt: Vec<DispersionParams> = points.iter().map(|p| scene.material_of(p.facet_id)).collect();
    let overall = scores(pred, &gt, freqs_hz)?;
    let mut by_mat: BTreeMap<String, (Vec<DispersionParams>, Vec<DispersionParams>)> = BTreeMap::new();
    for ((p, pr), g) in points.iter().zip(pred).zip(&gt) {
        let e = by_mat.entry(scene.facets[p.facet_id].material_id.clone()).or_default();
        e.0.push(*pr);
        e.1.push(*g);
    }
    let mut per = BTreeMap::new();
    for (k, (p, g)) in by_mat {
        per.insert(k, scores(&p, &g, freqs_hz)?);
    }
    Ok((overall, per))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResimReport {
    pub resim_error_db: f64,
    pub n_records: usize,
    pub skipped: usize,
}

/// Regenerates every reflected-path record of `dataset` with materials
/// from `material(facet_id, point)` and reports the mean absolute dB
/// magnitude error against the recorded CSI.
pub fn resimulate_and_score(
    scene: &Scene,
    dataset: &Dataset,
    material: &dyn Fn(usize, &Vec3) -> DispersionParams,
) -> Result<ResimReport> {
    let mut total = 0.0;
    let mut n = 0;
    let mut skipped = 0;
    for r in &dataset.records {
        let Some(meta) = &r.path else {
            continue;
        };
        if meta.kind == PathKind::Los {
            continue;
        }
        if r.csi.abs() < CSI_FLOOR {
            skipped += 1;
            continue;
        }
        let pol = dataset
            .header
            .tx_polarizations
            .get(r.tx_pol)
            .ok_or_else(|| Error::domain(format!("unknown TX polarization index {}", r.tx_pol)))?;
        let path = match meta.to_path(scene) {
            Ok(p) => p,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let (e, _) = path_field_with(&path, scene, pol, r.f, material)?;
        let csi = capture(e, r.pol.h_rx())?;
        total += (20.0 * (csi.abs() / r.csi.abs()).log10()).abs();
        n += 1;
    }
    if n == 0 {
        return Err(Error::domain("dataset has no scorable reflected-path records"));
    }
    Ok(ResimReport {
        resim_error_db: total / n as f64,
        n_records: n,
        skipped,
    })
}
