use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{field_forward_batch, field_loss_with, field_reg_with, FieldNet, FieldNetConfig, FieldSample};
use crate::error::{Error, Result};
use crate::optim::{Adam, ParamGroup, PlateauConfig, ReduceLrOnPlateau};
use crate::scene::{Aabb, Scene, Vec3};
use crate::simulator::{analytic_incident_field, Dataset, PathKind};

pub const FIELD_CHECKPOINT_SCHEMA: &str = "rfinv-field-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldTrainConfig {
    pub lambda_reg: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Points per minibatch that also enter the smoothness term.
    pub reg_points: usize,
    pub fd_step_m: f64,
    /// Adam denominator guard; small because field magnitudes are small.
    pub adam_eps: f64,
    pub plateau: PlateauConfig,
    /// Uniform free-space supervision points added to the dataset points.
    pub n_free_samples: usize,
}

impl Default for FieldTrainConfig {
    fn default() -> Self {
        Self {
            lambda_reg: 1e-3,
            lr: 1e-2,
            batch: 512,
            epochs: 2000,
            seed: 0,
            reg_points: 64,
            fd_step_m: 1e-3,
            adam_eps: 1e-15,
            plateau: PlateauConfig {
                min_lr: 1e-6,
                ..PlateauConfig::default()
            },
            n_free_samples: 2000,
        }
    }
}

impl FieldTrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.lr > 0.0) {
            e.push("field lr must be positive".into());
        }
        if self.batch == 0 {
            e.push("field batch must be at least 1".into());
        }
        if !(self.lambda_reg >= 0.0) {
            e.push("lambda_reg must be non-negative".into());
        }
        if !(self.fd_step_m > 0.0) {
            e.push("fd_step_m must be positive".into());
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEpoch {
    pub epoch: usize,
    pub field_loss: f64,
    pub reg: f64,
    pub total: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTrainReport {
    pub history: Vec<FieldEpoch>,
    pub final_field_loss: f64,
    pub final_reg: f64,
    pub epochs_completed: usize,
    /// Set when training stopped on a non-finite loss; the returned
    /// network holds the last finite parameters.
    pub aborted: Option<String>,
    pub reg_skipped: usize,
}

/// Supervision set: the first bounce point of every reflected path in the
/// dataset (direction from the transmitter), plus `n_free` uniform points
/// in the scene at least 0.1 m from the transmitter. Frequencies cycle
/// through `freqs_hz`; targets come from the analytic free-space field.
pub fn field_samples(scene: &Scene, dataset: Option<&Dataset>, n_free: usize, freqs_hz: &[f64], seed: u64) -> Vec<FieldSample> {
    let tx = &scene.tx;
    let mut points: Vec<Vec3> = Vec::new();
    if let Some(ds) = dataset {
        let mut seen = std::collections::BTreeSet::new();
        for r in &ds.records {
            if let Some(meta) = &r.path {
                if meta.kind != PathKind::Los && seen.insert((r.rx_index, r.path_index)) {
                    points.push(Vec3::from(meta.points[1]));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = scene.bounds;
    let mut added = 0;
    while added < n_free {
        let p = Vec3::new(
            rng.gen_range(b.min[0]..=b.max[0]),
            rng.gen_range(b.min[1]..=b.max[1]),
            rng.gen_range(b.min[2]..=b.max[2]),
        );
        if (p - tx.position).norm() >= 0.1 {
            points.push(p);
            added += 1;
        }
    }
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = (x - tx.position).normalize();
            let f = freqs_hz[i % freqs_hz.len()];
            FieldSample {
                x: *x,
                d,
                f,
                e: analytic_incident_field(tx, x, &d, f),
            }
        })
        .collect()
}

/// `sqrt(sum |pred - gt|^2 / sum |gt|^2)` over the samples.
pub fn held_out_relative_l2(net: &FieldNet, samples: &[FieldSample]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for chunk in samples.chunks(4096) {
        let xs: Vec<Vec3> = chunk.iter().map(|s| s.x).collect();
        let ds: Vec<Vec3> = chunk.iter().map(|s| s.d).collect();
        let fs: Vec<f64> = chunk.iter().map(|s| s.f).collect();
        let pred = field_forward_batch(net, &xs, &ds, &fs)?;
        for (p, s) in pred.iter().zip(chunk) {
            num += p.sub(s.e).norm_sqr();
            den += s.e.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

fn full_losses(net: &FieldNet, samples: &[FieldSample], cfg: &FieldTrainConfig) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    for chunk in samples.chunks(4096) {
        loss += field_loss_with(net, net.params(), chunk, None)? * chunk.len() as f64;
    }
    let stride = (samples.len() / 1024).max(1);
    let pts: Vec<(Vec3, Vec3)> = samples.iter().step_by(stride).map(|s| (s.x, s.d)).collect();
    let reg = field_reg_with(net, net.params(), &pts, cfg.fd_step_m, None)?.value;
    Ok((loss / samples.len() as f64, reg))
}

/// Adam on `field_loss + lambda_reg * field_reg` over shuffled
/// minibatches, with plateau learning-rate decay per epoch. Returns the
/// frozen network. `start_epoch` continues the numbering of a resumed run.
pub fn train_field(
    mut net: FieldNet,
    samples: &[FieldSample],
    cfg: &FieldTrainConfig,
    start_epoch: usize,
    adam_state: Option<Adam>,
) -> Result<(FieldNet, FieldTrainReport, Adam)> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    if samples.is_empty() {
        return Err(Error::domain("field training needs samples"));
    }
    let n = net.n_params();
    let mut adam = adam_state.unwrap_or_else(|| Adam::with_eps(n, cfg.adam_eps));
    let mut groups = vec![ParamGroup::new("field", 0..n, cfg.lr)];
    let mut plateau = ReduceLrOnPlateau::new(cfg.plateau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (start_epoch as u64).wrapping_mul(0x9E37_79B9));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grads = vec![0.0; n];
    let mut reg_grads = vec![0.0; n];
    let mut aborted = None;
    let mut reg_skipped = 0;
    let mut completed = start_epoch;
    for epoch in start_epoch..start_epoch + cfg.epochs {
        let last_good = net.params().to_vec();
        order.shuffle(&mut rng);
        let (mut sum_f, mut sum_r, mut batches) = (0.0, 0.0, 0usize);
        let mut bad = false;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<FieldSample> = chunk.iter().map(|&i| samples[i]).collect();
            grads.iter_mut().for_each(|g| *g = 0.0);
            let params = net.params().to_vec();
            let lf = field_loss_with(&net, &params, &batch, Some(&mut grads))?;
            let mut lr_val = 0.0;
            if cfg.lambda_reg > 0.0 && cfg.reg_points > 0 {
                reg_grads.iter_mut().for_each(|g| *g = 0.0);
                let pts: Vec<(Vec3, Vec3)> = batch.iter().take(cfg.reg_points).map(|s| (s.x, s.d)).collect();
                let r = field_reg_with(&net, &params, &pts, cfg.fd_step_m, Some(&mut reg_grads))?;
                reg_skipped += r.skipped;
                lr_val = r.value;
                for (g, rg) in grads.iter_mut().zip(&reg_grads) {
                    *g += cfg.lambda_reg * rg;
                }
            }
            if !(lf.is_finite() && lr_val.is_finite()) || grads.iter().any(|g| !g.is_finite()) {
                bad = true;
                break;
            }
            sum_f += lf;
            sum_r += lr_val;
            batches += 1;
            adam.step(net.params_mut()?, &grads, &groups);
        }
        if bad {
            net.params_mut()?.copy_from_slice(&last_good);
            aborted = Some(format!("non-finite field loss at epoch {epoch}"));
            break;
        }
        let field_loss = sum_f / batches as f64;
        let reg = sum_r / batches as f64;
        let total = field_loss + cfg.lambda_reg * reg;
        history.push(FieldEpoch {
            epoch,
            field_loss,
            reg,
            total,
            lr: groups[0].lr,
        });
        plateau.step(total, &mut groups);
        completed = epoch + 1;
    }
    let (final_field_loss, final_reg) = full_losses(&net, samples, cfg)?;
    net.freeze();
    Ok((
        net,
        FieldTrainReport {
            history,
            final_field_loss,
            final_reg,
            epochs_completed: completed,
            aborted,
            reg_skipped,
        },
        adam,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCheckpoint {
    pub schema: String,
    pub net: FieldNetConfig,
    pub bounds: Aabb,
    pub tx_position: [f64; 3],
    pub train: FieldTrainConfig,
    pub epochs_completed: usize,
    pub final_field_loss: f64,
    pub final_reg: f64,
    pub params: Vec<f64>,
    pub adam: Option<Adam>,
}

impl FieldCheckpoint {
    pub fn new(net: &FieldNet, train: &FieldTrainConfig, report: &FieldTrainReport, adam: Option<Adam>) -> Self {
        Self {
            schema: FIELD_CHECKPOINT_SCHEMA.into(),
            net: net.config,
            bounds: net.bounds,
            tx_position: net.tx_position.into(),
            train: train.clone(),
            epochs_completed: report.epochs_completed,
            final_field_loss: report.final_field_loss,
            final_reg: report.final_reg,
            params: net.params().to_vec(),
            adam,
        }
    }

    /// The stored network, frozen.
    pub fn network(&self) -> Result<FieldNet> {
        FieldNet::from_parts(self.net, self.bounds, Vec3::from(self.tx_position), self.params.clone())
    }

    /// A trainable copy of the stored network, for resuming.
    pub fn resume_network(&self) -> Result<FieldNet> {
        let mut net = self.network()?;
        net.frozen = false;
        Ok(net)
    }
}

pub fn save_field_checkpoint(ckpt: &FieldCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(ckpt).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_field_checkpoint(path: impl AsRef<Path>) -> Result<FieldCheckpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: FieldCheckpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    if ckpt.schema != FIELD_CHECKPOINT_SCHEMA {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: format!("unsupported checkpoint schema `{}`", ckpt.schema),
        });
    }
    Ok(ckpt)
}
