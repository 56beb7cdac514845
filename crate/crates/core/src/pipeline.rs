//! Stage functions shared by the command-line tool, the examples and the
//! acceptance suite: simulate, train the field, derive targets, fit the
//! decoder or baseline, and evaluate.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{EvalSection, FieldSection, ResolvedInvert, RunConfig};
use crate::em::DispersionParams;
use crate::error::{Error, Result};
use crate::field::{
    field_samples, held_out_relative_l2, load_field_checkpoint, save_field_checkpoint, train_field, FieldCheckpoint,
    FieldNet, FieldTrainReport,
};
use crate::inversion::{
    adam_phase, baseline_materials, compute_gamma_targets, decoder_forward_batch, lbfgs_phase, nmse_loss,
    predict_targets, save_decoder_checkpoint, train_baseline, AnalyticField, BaselineConfig, BaselineNet,
    DecoderCheckpoint, DecoderNet, GammaTarget, IncidentField, InversionProblem, InvertReport, TargetConfig, TargetSet,
};
use crate::metrics::{
    emit_grid_csv, emit_report, facet_eval_points, incidence_angle, material_grid, resimulate_and_score,
    score_materials, EvalPoint, EvalReport, ReportMeta,
};
use crate::numerics::Jones;
use crate::optim::Adam;
use crate::scene::{load_scene, perturb_normals, Scene, Vec3};
use crate::simulator::{generate_dataset, Dataset, PathKind};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Scene whose prior normals are tilted by `std_deg` degrees; the scene
/// itself when `std_deg` is zero.
pub fn prior_scene(scene: &Scene, std_deg: f64, seed: u64) -> Scene {
    perturb_normals(scene, std_deg.to_radians(), seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SimulateOutcome {
    pub dataset: Dataset,
    pub dataset_path: PathBuf,
    pub provenance: Provenance,
}

/// Writes the resolved configuration next to the outputs.
pub fn write_resolved_config(cfg: &RunConfig) -> Result<String> {
    ensure_dir(&cfg.output_dir)?;
    let text = cfg.to_toml_string()?;
    write_text(&cfg.output_dir.join("resolved_config.toml"), &text)?;
    Ok(text)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let scene = load_scene(&cfg.scene_path)?;
    let config_text = write_resolved_config(cfg)?;
    let dataset = generate_dataset(&scene, &cfg.simulate)?;
    let path = cfg.dataset_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let text = dataset.to_jsonl();
    write_text(&path, &text)?;
    let provenance = Provenance {
        tool_version: TOOL_VERSION.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        dataset_sha256: sha256_hex(text.as_bytes()),
        seed: cfg.simulate.seed,
    };
    let prov = serde_json::to_string_pretty(&provenance).map_err(|e| Error::Numerical(e.to_string()))?;
    write_text(&cfg.output_dir.join("provenance.json"), &(prov + "\n"))?;
    Ok(SimulateOutcome {
        dataset,
        dataset_path: path,
        provenance,
    })
}

#[derive(Clone, Debug)]
pub struct FieldStage {
    pub net: FieldNet,
    pub report: FieldTrainReport,
    pub adam: Adam,
    pub held_out_rel_l2: f64,
}

/// Trains (or resumes) the field net on analytic free-space supervision at
/// the dataset's bounce points and free points, and scores it on a held-out
/// free-space set.
pub fn train_field_stage(scene: &Scene, dataset: &Dataset, cfg: &FieldSection, resume: Option<&FieldCheckpoint>) -> Result<FieldStage> {
    let freqs = &dataset.header.freqs_hz;
    let samples = field_samples(scene, Some(dataset), cfg.train.n_free_samples, freqs, cfg.train.seed ^ 1);
    let held_out = field_samples(scene, None, cfg.held_out_samples, freqs, cfg.held_out_seed);
    let (net, start, adam) = match resume {
        Some(ck) => (ck.resume_network()?, ck.epochs_completed, ck.adam.clone()),
        None => (FieldNet::new(cfg.net, scene.bounds, scene.tx.position, cfg.init_seed), 0, None),
    };
    let (net, report, adam) = train_field(net, &samples, &cfg.train, start, adam)?;
    let held_out_rel_l2 = held_out_relative_l2(&net, &held_out)?;
    Ok(FieldStage {
        net,
        report,
        adam,
        held_out_rel_l2,
    })
}

pub fn cmd_train_field(cfg: &RunConfig, resume: bool) -> Result<FieldStage> {
    let scene = load_scene(&cfg.scene_path)?;
    let dataset = Dataset::read_jsonl(cfg.dataset_path())?;
    write_resolved_config(cfg)?;
    let ck_path = cfg.field_checkpoint_path();
    let previous = if resume { Some(load_field_checkpoint(&ck_path)?) } else { None };
    let stage = train_field_stage(&scene, &dataset, &cfg.field, previous.as_ref())?;
    let ck = FieldCheckpoint::new(&stage.net, &cfg.field.train, &stage.report, Some(stage.adam.clone()));
    save_field_checkpoint(&ck, &ck_path)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numerical(e.to_string());
    w.write_record(["epoch", "field_loss", "reg", "total", "lr"]).map_err(csv_err)?;
    for h in &stage.report.history {
        w.write_record([h.epoch.to_string(), float(h.field_loss), float(h.reg), float(h.total), float(h.lr)])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    let hist = cfg.output_dir.join("field_history.csv");
    std::fs::write(&hist, bytes).map_err(|e| Error::io(&hist, e))?;
    Ok(stage)
}

/// The incident field used for targets: analytic, or the frozen field net
/// from the output directory's checkpoint.
pub fn incident_field(cfg: &RunConfig, dataset: &Dataset) -> Result<Box<dyn IncidentField>> {
    if cfg.invert.oracle_field {
        return Ok(Box::new(AnalyticField::from_dataset(dataset)));
    }
    let path = cfg.field_checkpoint_path();
    if !path.exists() {
        return Err(Error::Validation(vec![format!(
            "field checkpoint {} not found; run train-field first or set invert.oracle_field",
            path.display()
        )]));
    }
    Ok(Box::new(load_field_checkpoint(&path)?.network()?))
}

/// Reflection targets on the prior geometry, arranged for training.
pub fn build_problem(
    dataset: &Dataset,
    prior: &Scene,
    field: &dyn IncidentField,
    targets: &TargetConfig,
    resolved: &ResolvedInvert,
) -> Result<(TargetSet, InversionProblem)> {
    let set = compute_gamma_targets(dataset, prior, field, targets)?;
    let problem = InversionProblem::new(&set, resolved.train.freq_weighting)?;
    Ok((set, problem))
}

/// Initializes and trains a decoder: Adam, then L-BFGS when enabled.
pub fn fit_decoder(problem: &InversionProblem, scene: &Scene, resolved: &ResolvedInvert, init_seed: u64) -> Result<(DecoderNet, InvertReport)> {
    let net = DecoderNet::new(resolved.decoder, scene.bounds, init_seed)?;
    let adam = adam_phase(net, problem, &resolved.train)?;
    lbfgs_phase(&adam, problem, &resolved.train)
}

/// Anything that assigns dispersion parameters to facet points.
pub trait MaterialModel {
    fn materials(&self, scene: &Scene, points: &[EvalPoint]) -> Result<Vec<DispersionParams>>;
}

impl MaterialModel for DecoderNet {
    fn materials(&self, _scene: &Scene, points: &[EvalPoint]) -> Result<Vec<DispersionParams>> {
        let xs: Vec<Vec3> = points.iter().map(|p| p.point).collect();
        Ok(decoder_forward_batch(self, &xs))
    }
}

/// The scene's own facet materials (exactness control).
pub struct GroundTruth;

impl MaterialModel for GroundTruth {
    fn materials(&self, scene: &Scene, points: &[EvalPoint]) -> Result<Vec<DispersionParams>> {
        Ok(points.iter().map(|p| scene.material_of(p.facet_id)).collect())
    }
}

/// Baseline materials decoded by least squares at the direct-ray incidence
/// angle of each point.
impl MaterialModel for BaselineNet {
    fn materials(&self, scene: &Scene, points: &[EvalPoint]) -> Result<Vec<DispersionParams>> {
        let q: Vec<(Vec3, f64)> = points
            .iter()
            .map(|p| (p.point, incidence_angle(scene, p).unwrap_or(0.0)))
            .collect();
        let freqs: Vec<f64> = self.freqs_hz.clone();
        baseline_materials(self, &q, &freqs)
    }
}

fn point_key(fid: usize, x: &Vec3) -> (usize, [u64; 3]) {
    (fid, [x.x.to_bits(), x.y.to_bits(), x.z.to_bits()])
}

/// Distinct reflection points of the dataset's reflected paths.
pub fn reflection_points(scene: &Scene, dataset: &Dataset) -> Vec<EvalPoint> {
    let mut seen = BTreeMap::new();
    for r in &dataset.records {
        let Some(meta) = &r.path else { continue };
        if meta.kind == PathKind::Los {
            continue;
        }
        let Ok(path) = meta.to_path(scene) else { continue };
        for (k, &fid) in path.facet_ids.iter().enumerate() {
            let x = path.waypoints[k + 1];
            seen.entry(point_key(fid, &x)).or_insert(EvalPoint { facet_id: fid, point: x });
        }
    }
    seen.into_values().collect()
}

/// Per-frequency NMSE of predicted Jones matrices against targets.
pub fn per_frequency_nmse(targets: &[GammaTarget], preds: &[Jones]) -> Result<Vec<Option<f64>>> {
    Ok(nmse_loss(targets, preds)?.per_freq)
}

pub fn decoder_target_nmse(net: &DecoderNet, problem: &InversionProblem) -> Result<Vec<Option<f64>>> {
    let all: Vec<usize> = (0..problem.n_points()).collect();
    let (idx, preds) = predict_targets(net, problem, &all)?;
    let targets: Vec<GammaTarget> = idx.iter().map(|&i| problem.targets[i].clone()).collect();
    per_frequency_nmse(&targets, &preds)
}

pub fn baseline_target_nmse(net: &BaselineNet, problem: &InversionProblem) -> Result<Vec<Option<f64>>> {
    let xs: Vec<Vec3> = problem.targets.iter().map(|t| t.point).collect();
    let fs: Vec<f64> = problem.targets.iter().map(|t| t.f).collect();
    per_frequency_nmse(&problem.targets, &net.predict(&xs, &fs))
}

/// Identification carried into the report.
#[derive(Clone, Debug, Default)]
pub struct ReportContext {
    pub config_id: String,
    pub seeds: BTreeMap<String, u64>,
    pub provenance: String,
}

/// Material scores at facet-uniform points, re-simulation error over the
/// dataset's reflected paths, and the supplied per-frequency NMSE.
pub fn evaluate_model(
    scene: &Scene,
    dataset: &Dataset,
    model: &dyn MaterialModel,
    per_frequency_nmse: Vec<Option<f64>>,
    eval: &EvalSection,
    ctx: &ReportContext,
) -> Result<EvalReport> {
    let freqs = &dataset.header.freqs_hz;
    let points = facet_eval_points(scene, eval.points_per_facet, eval.seed);
    let pred = model.materials(scene, &points)?;
    let (overall, per_material) = score_materials(scene, &points, &pred, freqs)?;

    let refl = reflection_points(scene, dataset);
    let refl_mat = model.materials(scene, &refl)?;
    let lookup: HashMap<_, _> = refl.iter().zip(refl_mat).map(|(p, m)| (point_key(p.facet_id, &p.point), m)).collect();
    let resim = resimulate_and_score(scene, dataset, &|fid, x| {
        lookup.get(&point_key(fid, x)).copied().unwrap_or_else(|| {
            // only reached for points not listed by reflection_points
            model
                .materials(scene, &[EvalPoint { facet_id: fid, point: *x }])
                .map(|v| v[0])
                .unwrap_or_else(|_| scene.material_of(fid))
        })
    })?;

    let mut seeds = ctx.seeds.clone();
    seeds.insert("eval".into(), eval.seed);
    Ok(EvalReport {
        scene: scene.name.clone(),
        config_id: ctx.config_id.clone(),
        eps_mre: overall.eps_mre,
        sigma_mre: overall.sigma_mre,
        abcd_mae: overall.abcd_mae,
        sigma_floored: overall.sigma_floored,
        sigma_floored_abs_err: overall.sigma_floored_abs_err,
        n_eval_points: overall.n_points,
        per_material,
        freqs_hz: freqs.clone(),
        per_frequency_nmse,
        resim_error_db: Some(resim.resim_error_db),
        meta: ReportMeta {
            seeds,
            provenance: ctx.provenance.clone(),
            timestamp: None,
        },
    })
}

/// Everything `invert` produces.
#[derive(Clone, Debug)]
pub struct InvertOutcome {
    pub net: DecoderNet,
    pub train: InvertReport,
    pub targets: TargetSet,
    pub report: EvalReport,
    pub resolved: ResolvedInvert,
}

fn report_context(cfg: &RunConfig, dataset_text_sha: &str, config_text: &str, config_id: &str, resolved: Option<&ResolvedInvert>) -> ReportContext {
    let mut seeds = BTreeMap::new();
    seeds.insert("simulate".into(), cfg.simulate.seed);
    seeds.insert("field_init".into(), cfg.field.init_seed);
    seeds.insert("field_train".into(), cfg.field.train.seed);
    seeds.insert("decoder_init".into(), cfg.invert.init_seed);
    seeds.insert("normals".into(), cfg.invert.normal_seed);
    if let Some(r) = resolved {
        seeds.insert("decoder_train".into(), r.train.seed);
    }
    ReportContext {
        config_id: config_id.to_string(),
        seeds,
        provenance: format!(
            "rfinv {TOOL_VERSION}; config sha256:{}; dataset sha256:{dataset_text_sha}",
            sha256_hex(config_text.as_bytes())
        ),
    }
}

struct Inputs {
    scene: Scene,
    prior: Scene,
    dataset: Dataset,
    dataset_sha: String,
    config_text: String,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let scene = load_scene(&cfg.scene_path)?;
    let path = cfg.dataset_path();
    let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let dataset = Dataset::read_jsonl(&path)?;
    let prior = prior_scene(&scene, cfg.invert.normal_std_deg, cfg.invert.normal_seed);
    let config_text = write_resolved_config(cfg)?;
    Ok(Inputs {
        scene,
        prior,
        dataset,
        dataset_sha: sha256_hex(&text),
        config_text,
    })
}

fn write_invert_history(path: &Path, report: &InvertReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numerical(e.to_string());
    let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
    w.write_record(["phase", "epoch", "nmse", "l_hash", "l_gate", "total", "lr_mlp", "lr_hash", "active_levels"])
        .map_err(csv_err)?;
    for h in &report.history {
        w.write_record([
            format!("{:?}", h.phase).to_lowercase(),
            h.epoch.to_string(),
            opt(h.nmse),
            opt(h.l_hash),
            opt(h.l_gate),
            float(h.total),
            float(h.lr_mlp),
            float(h.lr_hash),
            h.active_levels.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn emit_outputs(cfg: &RunConfig, scene: &Scene, model: &dyn MaterialModel, report: &EvalReport, stem: &str) -> Result<PathBuf> {
    let ext = match cfg.eval.format {
        crate::metrics::ReportFormat::Json => "json",
        crate::metrics::ReportFormat::Csv => "csv",
    };
    let path = cfg.output_dir.join(format!("{stem}.{ext}"));
    emit_report(report, &path, cfg.eval.format)?;
    if cfg.eval.grid_resolution > 0 {
        let n = cfg.eval.grid_resolution;
        let mut pts = Vec::with_capacity(scene.facets.len() * n * n);
        for (fid, facet) in scene.facets.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let p = facet.point_at((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                    pts.push(EvalPoint { facet_id: fid, point: p });
                }
            }
        }
        let mats = model.materials(scene, &pts)?;
        let lookup: HashMap<_, _> = pts.iter().zip(mats).map(|(p, m)| (point_key(p.facet_id, &p.point), m)).collect();
        let rows = material_grid(scene, n, cfg.eval.grid_freq_hz, &|fid, x| {
            lookup.get(&point_key(fid, x)).copied().unwrap_or_else(|| scene.material_of(fid))
        });
        emit_grid_csv(&rows, cfg.output_dir.join(format!("{stem}_grid.csv")))?;
    }
    Ok(path)
}

/// Targets, decoder training, checkpoint, history, report and grid.
pub fn cmd_invert(cfg: &RunConfig) -> Result<InvertOutcome> {
    let inputs = load_inputs(cfg)?;
    let resolved = cfg.invert.resolve()?;
    let field = incident_field(cfg, &inputs.dataset)?;
    let (targets, problem) = build_problem(&inputs.dataset, &inputs.prior, field.as_ref(), &cfg.invert.targets, &resolved)?;
    let (net, train) = fit_decoder(&problem, &inputs.scene, &resolved, cfg.invert.init_seed)?;
    let epochs = train.history.len();
    let ck = DecoderCheckpoint::new(
        &net,
        Some(&resolved.preset),
        &resolved.train,
        cfg.invert.init_seed,
        epochs,
        train.final_loss.clone(),
    );
    save_decoder_checkpoint(&ck, cfg.decoder_checkpoint_path())?;
    write_invert_history(&cfg.output_dir.join("invert_history.csv"), &train)?;
    let ctx = report_context(cfg, &inputs.dataset_sha, &inputs.config_text, &resolved.preset, Some(&resolved));
    let nmse = decoder_target_nmse(&net, &problem)?;
    let report = evaluate_model(&inputs.scene, &inputs.dataset, &net, nmse, &cfg.eval, &ctx)?;
    emit_outputs(cfg, &inputs.scene, &net, &report, "report")?;
    Ok(InvertOutcome {
        net,
        train,
        targets,
        report,
        resolved,
    })
}

/// Evaluation of an existing decoder checkpoint, or of the ground-truth
/// materials. Targets for the per-frequency NMSE use the configured prior
/// geometry, so a normal perturbation shows up there and in nothing that
/// reads only the true scene.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, ground_truth: bool) -> Result<EvalReport> {
    let inputs = load_inputs(cfg)?;
    let field = incident_field(cfg, &inputs.dataset)?;
    let set = compute_gamma_targets(&inputs.dataset, &inputs.prior, field.as_ref(), &cfg.invert.targets)?;
    let (model, id, nmse): (Box<dyn MaterialModel>, String, Vec<Option<f64>>) = if ground_truth {
        let preds: Vec<Jones> = set
            .targets
            .iter()
            .map(|t| crate::inversion::reflection_layer(&inputs.scene.material_of(t.facet_id), t.theta_i, t.f))
            .collect::<Result<_>>()?;
        (Box::new(GroundTruth), "ground-truth".into(), per_frequency_nmse(&set.targets, &preds)?)
    } else {
        let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.decoder_checkpoint_path());
        if !path.exists() {
            return Err(Error::Validation(vec![format!("decoder checkpoint {} not found", path.display())]));
        }
        let ck = crate::inversion::load_decoder_checkpoint(&path)?;
        let net = ck.network()?;
        let problem = InversionProblem::new(&set, ck.train.freq_weighting)?;
        let nmse = decoder_target_nmse(&net, &problem)?;
        (Box::new(net), ck.preset.clone().unwrap_or_else(|| "decoder".into()), nmse)
    };
    let resolved = cfg.invert.resolve().ok();
    let ctx = report_context(cfg, &inputs.dataset_sha, &inputs.config_text, &id, resolved.as_ref());
    let report = evaluate_model(&inputs.scene, &inputs.dataset, model.as_ref(), nmse, &cfg.eval, &ctx)?;
    emit_outputs(cfg, &inputs.scene, model.as_ref(), &report, "eval_report")?;
    Ok(report)
}

/// Pseudo-preset id that runs the entangled-MLP baseline in `ablate`.
pub const BASELINE_ID: &str = "Baseline";

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub id: String,
    pub result: std::result::Result<EvalReport, String>,
    pub final_loss: Option<f64>,
}

pub fn train_baseline_stage(problem: &InversionProblem, scene: &Scene, cfg: &BaselineConfig) -> Result<(BaselineNet, f64)> {
    let net = BaselineNet::new(*cfg, scene.bounds, &problem.freqs_hz)?;
    let (net, rep) = train_baseline(net, problem)?;
    Ok((net, rep.final_nmse))
}

/// Runs every preset on shared data and targets. A failed preset keeps its
/// row, marked with the error.
pub fn cmd_ablate(cfg: &RunConfig, ids: &[String]) -> Result<Vec<AblationRow>> {
    let inputs = load_inputs(cfg)?;
    let field = incident_field(cfg, &inputs.dataset)?;
    let mut rows = Vec::new();
    let mut cache: BTreeMap<String, (TargetSet, InversionProblem)> = BTreeMap::new();
    for id in ids {
        let mut run = || -> Result<(EvalReport, f64)> {
            if id == BASELINE_ID {
                let resolved = cfg.invert.resolve()?;
                let (_, problem) = build_problem(&inputs.dataset, &inputs.prior, field.as_ref(), &cfg.invert.targets, &resolved)?;
                let (net, loss) = train_baseline_stage(&problem, &inputs.scene, &cfg.baseline)?;
                let ctx = report_context(cfg, &inputs.dataset_sha, &inputs.config_text, id, None);
                let nmse = baseline_target_nmse(&net, &problem)?;
                return Ok((evaluate_model(&inputs.scene, &inputs.dataset, &net, nmse, &cfg.eval, &ctx)?, loss));
            }
            let preset = crate::inversion::ablation_presets(id)?;
            let resolved = cfg.invert.resolve_from(&preset.id, &preset.decoder, &preset.train)?;
            let key = format!("{:?}", resolved.train.freq_weighting);
            if !cache.contains_key(&key) {
                let built = build_problem(&inputs.dataset, &inputs.prior, field.as_ref(), &cfg.invert.targets, &resolved)?;
                cache.insert(key.clone(), built);
            }
            let problem = &cache[&key].1;
            let (net, train) = fit_decoder(problem, &inputs.scene, &resolved, cfg.invert.init_seed)?;
            let ctx = report_context(cfg, &inputs.dataset_sha, &inputs.config_text, id, Some(&resolved));
            let nmse = decoder_target_nmse(&net, problem)?;
            let report = evaluate_model(&inputs.scene, &inputs.dataset, &net, nmse, &cfg.eval, &ctx)?;
            Ok((report, train.final_loss.total))
        };
        let row = match run() {
            Ok((report, loss)) => AblationRow {
                id: id.clone(),
                result: Ok(report),
                final_loss: Some(loss),
            },
            Err(e) => AblationRow {
                id: id.clone(),
                result: Err(e.to_string()),
                final_loss: None,
            },
        };
        rows.push(row);
    }
    let text = ablation_csv(&rows)?;
    write_text(&cfg.output_dir.join("ablation.csv"), &text)?;
    Ok(rows)
}

/// One row per preset, in the given order.
pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numerical(e.to_string());
    w.write_record(["preset", "status", "eps_mre", "sigma_mre", "abcd_mae", "resim_error_db", "final_loss"])
        .map_err(csv_err)?;
    for r in rows {
        let rec = match &r.result {
            Ok(rep) => vec![
                r.id.clone(),
                "ok".into(),
                float(rep.eps_mre),
                float(rep.sigma_mre),
                float(rep.abcd_mae),
                rep.resim_error_db.map(float).unwrap_or_default(),
                r.final_loss.map(float).unwrap_or_default(),
            ],
            Err(e) => vec![r.id.clone(), format!("failed: {e}"), String::new(), String::new(), String::new(), String::new(), String::new()],
        };
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub name: String,
    pub n_facets: usize,
    pub materials: Vec<String>,
    pub total_area_m2: f64,
}

/// Loads and validates a scene file.
pub fn cmd_validate_scene(path: &Path) -> Result<SceneSummary> {
    let scene = load_scene(path)?;
    Ok(SceneSummary {
        name: scene.name.clone(),
        n_facets: scene.facets.len(),
        materials: scene.materials.keys().cloned().collect(),
        total_area_m2: scene.facets.iter().map(|f| f.area()).sum(),
    })
}
