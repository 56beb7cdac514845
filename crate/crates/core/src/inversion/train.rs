use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decoder::DecoderNet;
use super::loss::{evaluate_objective, FreqWeighting, InversionProblem, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::optim::{lbfgs_minimize, Adam, LbfgsConfig, ParamGroup, PlateauConfig, ReduceLrOnPlateau, StopReason};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsScope {
    /// MLP weights, hash embeddings and gates.
    #[default]
    All,
    /// MLP weights only; the hash grid stays fixed.
    MlpOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsPhase {
    pub enabled: bool,
    pub scope: LbfgsScope,
    pub iters: usize,
    pub history: usize,
}

impl Default for LbfgsPhase {
    fn default() -> Self {
        Self {
            enabled: false,
            scope: LbfgsScope::All,
            iters: 200,
            history: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertTrainConfig {
    pub lambda_hash: f64,
    pub lambda_gate: f64,
    pub lr_mlp: f64,
    pub lr_hash: f64,
    /// Bounce points per Adam minibatch; the whole set when larger.
    pub batch: usize,
    pub epochs: usize,
    pub plateau: PlateauConfig,
    pub lbfgs: LbfgsPhase,
    /// Fraction of the Adam epochs over which hash levels are enabled
    /// coarse to fine; `None` trains all levels from the start.
    pub unfreeze_fraction: Option<f64>,
    pub freq_weighting: FreqWeighting,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for InvertTrainConfig {
    fn default() -> Self {
        Self {
            lambda_hash: 1e-6,
            lambda_gate: 1e-4,
            lr_mlp: 1e-3,
            lr_hash: 5e-4,
            batch: 32768,
            epochs: 2000,
            plateau: PlateauConfig {
                factor: 0.5,
                patience: 50,
                min_lr: 1e-6,
                ..PlateauConfig::default()
            },
            lbfgs: LbfgsPhase::default(),
            unfreeze_fraction: None,
            freq_weighting: FreqWeighting::Uniform,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl InvertTrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.lr_mlp > 0.0 && self.lr_hash > 0.0) {
            e.push("learning rates must be positive".into());
        }
        if !(self.lambda_hash >= 0.0 && self.lambda_gate >= 0.0) {
            e.push("lambda_hash and lambda_gate must be non-negative".into());
        }
        if self.batch == 0 {
            e.push("batch must be at least 1".into());
        }
        if let Some(u) = self.unfreeze_fraction {
            if !(u > 0.0 && u <= 1.0) {
                e.push("unfreeze_fraction must be in (0, 1]".into());
            }
        }
        if self.lbfgs.enabled && self.lbfgs.history == 0 {
            e.push("lbfgs history must be at least 1".into());
        }
        e
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_hash: self.lambda_hash,
            lambda_gate: self.lambda_gate,
        }
    }

    /// Hash levels enabled at `epoch` of `epochs` for `levels` total.
    pub fn active_levels(&self, epoch: usize, levels: usize) -> usize {
        match self.unfreeze_fraction {
            None => levels,
            Some(frac) => {
                let span = (frac * self.epochs as f64).max(1.0);
                let k = 1 + (epoch as f64 * levels as f64 / span).floor() as usize;
                k.min(levels)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Adam,
    Lbfgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertEpoch {
    pub phase: Phase,
    pub epoch: usize,
    /// Loss components; absent for L-BFGS steps, which report the total.
    pub nmse: Option<f64>,
    pub l_hash: Option<f64>,
    pub l_gate: Option<f64>,
    pub total: f64,
    pub lr_mlp: f64,
    pub lr_hash: f64,
    pub active_levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertReport {
    pub history: Vec<InvertEpoch>,
    /// Full-set objective after the Adam phase.
    pub after_adam: LossBreakdown,
    /// Full-set objective at the end.
    pub final_loss: LossBreakdown,
    pub lbfgs_iterations: usize,
    pub lbfgs_stop: Option<StopReason>,
    /// Set when a phase stopped on a non-finite loss; parameters were
    /// reverted to the last finite state.
    pub aborted: Option<String>,
}

/// State carried between [`adam_phase`] and [`lbfgs_phase`] so several
/// fine-tuning variants can share one Adam run.
#[derive(Clone, Debug)]
pub struct AdamOutcome {
    pub net: DecoderNet,
    pub history: Vec<InvertEpoch>,
    pub after_adam: LossBreakdown,
    pub aborted: Option<String>,
}

/// Adam with separate MLP and hash learning rates, per-epoch plateau decay
/// of both, optional progressive unfreeze of hash levels.
pub fn adam_phase(mut net: DecoderNet, problem: &InversionProblem, cfg: &InvertTrainConfig) -> Result<AdamOutcome> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let weights = cfg.loss_weights();
    let n = net.n_params();
    let mut adam = Adam::with_eps(n, cfg.adam_eps);
    let mut groups = vec![
        ParamGroup::new("mlp", net.mlp_range(), cfg.lr_mlp),
        ParamGroup::new("hash", net.hash_range(), cfg.lr_hash),
    ];
    let mut plateau = ReduceLrOnPlateau::new(cfg.plateau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..problem.n_points()).collect();
    let levels = net.config.hash_levels;
    let mut grads = vec![0.0; n];
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut aborted = None;
    for epoch in 0..cfg.epochs {
        net.active_levels = cfg.active_levels(epoch, levels);
        let last_good = net.params().to_vec();
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        let mut bad = false;
        for chunk in order.chunks(cfg.batch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let params = net.params().to_vec();
            let l = evaluate_objective(&net, &params, problem, chunk, weights, Some(&mut grads))?;
            if !l.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                bad = true;
                break;
            }
            sum.nmse += l.nmse;
            sum.l_hash += l.l_hash;
            sum.l_gate += l.l_gate;
            sum.total += l.total;
            batches += 1;
            adam.step(net.params_mut(), &grads, &groups);
        }
        if bad {
            net.set_params(&last_good);
            aborted = Some(format!("non-finite loss in Adam epoch {epoch}"));
            break;
        }
        let b = batches as f64;
        history.push(InvertEpoch {
            phase: Phase::Adam,
            epoch,
            nmse: Some(sum.nmse / b),
            l_hash: Some(sum.l_hash / b),
            l_gate: Some(sum.l_gate / b),
            total: sum.total / b,
            lr_mlp: groups[0].lr,
            lr_hash: groups[1].lr,
            active_levels: net.active_levels,
        });
        plateau.step(sum.total / b, &mut groups);
    }
    net.active_levels = levels;
    let all: Vec<usize> = (0..problem.n_points()).collect();
    let after_adam = evaluate_objective(&net, net.params(), problem, &all, weights, None)?;
    Ok(AdamOutcome {
        net,
        history,
        after_adam,
        aborted,
    })
}

/// Full-batch L-BFGS over the selected parameters, starting from an Adam
/// outcome. A non-finite result reverts to the starting parameters.
pub fn lbfgs_phase(start: &AdamOutcome, problem: &InversionProblem, cfg: &InvertTrainConfig) -> Result<(DecoderNet, InvertReport)> {
    let mut net = start.net.clone();
    let mut history = start.history.clone();
    let mut aborted = start.aborted.clone();
    let mut lbfgs_iterations = 0;
    let mut lbfgs_stop = None;
    let weights = cfg.loss_weights();
    let all: Vec<usize> = (0..problem.n_points()).collect();
    if cfg.lbfgs.enabled && aborted.is_none() {
        let range = match cfg.lbfgs.scope {
            LbfgsScope::All => 0..net.n_params(),
            LbfgsScope::MlpOnly => net.mlp_range(),
        };
        let base = net.params().to_vec();
        let mut x = base[range.clone()].to_vec();
        let lcfg = LbfgsConfig {
            history: cfg.lbfgs.history,
            max_iter: cfg.lbfgs.iters,
            max_evals: cfg.lbfgs.iters + cfg.lbfgs.iters / 4 + 25,
            ..LbfgsConfig::default()
        };
        let mut eval_err = None;
        let report = {
            let net_ref = &net;
            let objective = |v: &[f64]| {
                let mut p = base.clone();
                p[range.clone()].copy_from_slice(v);
                let mut g = vec![0.0; p.len()];
                match evaluate_objective(net_ref, &p, problem, &all, weights, Some(&mut g)) {
                    Ok(l) => (l.total, g[range.clone()].to_vec()),
                    Err(e) => {
                        eval_err.get_or_insert(e);
                        (f64::NAN, vec![0.0; v.len()])
                    }
                }
            };
            lbfgs_minimize(&mut x, objective, &lcfg)
        };
        if let Some(e) = eval_err {
            return Err(e);
        }
        lbfgs_iterations = report.iterations;
        lbfgs_stop = Some(report.stop);
        let mut p = base.clone();
        p[range].copy_from_slice(&x);
        let adam_epochs = history.len();
        let lr_mlp = history.last().map(|h| h.lr_mlp).unwrap_or(cfg.lr_mlp);
        let lr_hash = history.last().map(|h| h.lr_hash).unwrap_or(cfg.lr_hash);
        if report.f_final.is_finite() && x.iter().all(|v| v.is_finite()) {
            net.set_params(&p);
            for (i, f) in report.history.iter().enumerate() {
                history.push(InvertEpoch {
                    phase: Phase::Lbfgs,
                    epoch: adam_epochs + i,
                    nmse: None,
                    l_hash: None,
                    l_gate: None,
                    total: *f,
                    lr_mlp,
                    lr_hash,
                    active_levels: net.active_levels,
                });
            }
        } else {
            aborted = Some("non-finite loss in L-BFGS phase".into());
        }
    }
    let final_loss = evaluate_objective(&net, net.params(), problem, &all, weights, None)?;
    Ok((
        net,
        InvertReport {
            history,
            after_adam: start.after_adam.clone(),
            final_loss,
            lbfgs_iterations,
            lbfgs_stop,
            aborted,
        },
    ))
}

/// Adam phase followed, when enabled, by L-BFGS fine-tuning.
pub fn train_inversion(net: DecoderNet, problem: &InversionProblem, cfg: &InvertTrainConfig) -> Result<(DecoderNet, InvertReport)> {
    let adam = adam_phase(net, problem, cfg)?;
    lbfgs_phase(&adam, problem, cfg)
}
