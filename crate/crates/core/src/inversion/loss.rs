use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::decoder::DecoderNet;
use super::targets::{GammaTarget, JonesEntry, TargetSet};
use crate::em::{reflection_jones, DispersionParams};
use crate::error::{Error, Result};
use crate::numerics::{GradientTape, Jones};
use crate::scene::Vec3;

/// Largest incidence angle accepted by [`reflection_layer`].
pub const MAX_THETA_I: f64 = std::f64::consts::FRAC_PI_2 - 1e-6;

const ENTRIES: [JonesEntry; 4] = [JonesEntry::Pp, JonesEntry::Ps, JonesEntry::Sp, JonesEntry::Ss];

fn check_theta(theta_i: f64) -> Result<()> {
    if !(0.0..=MAX_THETA_I).contains(&theta_i) {
        return Err(Error::domain(format!("incidence angle {theta_i} outside [0, pi/2 - 1e-6]")));
    }
    Ok(())
}

/// Non-trainable physics layer: dispersion, impedances, Snell and Fresnel
/// assembled into a diagonal Jones matrix.
pub fn reflection_layer(p: &DispersionParams, theta_i: f64, f: f64) -> Result<Jones> {
    check_theta(theta_i)?;
    reflection_jones(p.to_array(), theta_i, f)
}

/// Gradient with respect to `(a, b, c, d)` of
/// `sum_e Re(w_e) Re(J_e) + Im(w_e) Im(J_e)`, with the layer value.
pub fn reflection_layer_grad(p: &DispersionParams, theta_i: f64, f: f64, w: &Jones) -> Result<(Jones, [f64; 4])> {
    let tape = GradientTape::with_capacity(512);
    reflection_vjp(&tape, p.to_array(), &[(theta_i, f, *w)])
        .map(|(mut v, g)| (v.pop().expect("one evaluation"), g))
}

/// Evaluates the layer for several `(theta, f, cotangent)` triples sharing
/// one parameter vector and returns the values and the summed gradient.
fn reflection_vjp(tape: &GradientTape, p: [f64; 4], evals: &[(f64, f64, Jones)]) -> Result<(Vec<Jones>, [f64; 4])> {
    tape.clear();
    let vars = tape.vars(&p);
    let pv = [vars[0], vars[1], vars[2], vars[3]];
    let mut acc = tape.constant(0.0);
    let mut values = Vec::with_capacity(evals.len());
    for &(theta, f, w) in evals {
        check_theta(theta)?;
        let j = reflection_jones(pv, theta, f)?;
        let jv = [j.pp, j.ps, j.sp, j.ss];
        for (e, c) in ENTRIES.iter().zip(jv) {
            let g = e.get(&w);
            if g.re != 0.0 {
                acc = acc + c.re * g.re;
            }
            if g.im != 0.0 {
                acc = acc + c.im * g.im;
            }
        }
        values.push(Jones::new(jv[0].value(), jv[1].value(), jv[2].value(), jv[3].value()));
    }
    let grads = tape.backward(acc);
    Ok((values, [grads.wrt(pv[0]), grads.wrt(pv[1]), grads.wrt(pv[2]), grads.wrt(pv[3])]))
}

/// Per-frequency loss weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqWeighting {
    #[default]
    Uniform,
    /// `w(f) = f / f_max`.
    Linear,
}

impl FreqWeighting {
    pub fn weights(self, freqs: &[f64]) -> Vec<f64> {
        let fmax = freqs.iter().copied().fold(0.0, f64::max);
        freqs
            .iter()
            .map(|&f| match self {
                FreqWeighting::Uniform => 1.0,
                FreqWeighting::Linear => f / fmax,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NmseReport {
    pub value: f64,
    /// Per frequency index, `None` for groups that were empty or skipped.
    pub per_freq: Vec<Option<f64>>,
    pub skipped_groups: usize,
}

/// Frequency-grouped normalized error
/// `sum_f w_f sum_t w_t |gt - pred|^2 / sum_t w_t |gt|^2`, over the kept
/// entries of each target. `freq_weights` is indexed by frequency index;
/// an empty slice means all ones.
pub fn nmse_loss_weighted(targets: &[GammaTarget], preds: &[Jones], freq_weights: &[f64]) -> Result<NmseReport> {
    nmse_impl(targets, preds, freq_weights, None)
}

/// [`nmse_loss_weighted`] with unit frequency weights.
pub fn nmse_loss(targets: &[GammaTarget], preds: &[Jones]) -> Result<NmseReport> {
    nmse_impl(targets, preds, &[], None)
}

/// Loss and, per target, the gradient `dL/dRe + i dL/dIm` of each entry.
pub fn nmse_loss_grad(targets: &[GammaTarget], preds: &[Jones], freq_weights: &[f64]) -> Result<(NmseReport, Vec<Jones>)> {
    let mut g = vec![Jones::default(); targets.len()];
    let r = nmse_impl(targets, preds, freq_weights, Some(&mut g))?;
    Ok((r, g))
}

fn nmse_impl(
    targets: &[GammaTarget],
    preds: &[Jones],
    freq_weights: &[f64],
    mut grads: Option<&mut [Jones]>,
) -> Result<NmseReport> {
    if targets.len() != preds.len() {
        return Err(Error::domain("targets and predictions differ in length"));
    }
    if targets.is_empty() {
        return Err(Error::domain("nmse needs a non-empty batch"));
    }
    let n_freq = targets.iter().map(|t| t.freq_index + 1).max().unwrap_or(0).max(freq_weights.len());
    let mut num = vec![0.0; n_freq];
    let mut den = vec![0.0; n_freq];
    let mut present = vec![false; n_freq];
    for (t, p) in targets.iter().zip(preds) {
        present[t.freq_index] = true;
        for e in &t.entries {
            num[t.freq_index] += e.weight * (e.value - e.entry.get(p)).norm_sqr();
            den[t.freq_index] += e.weight * e.value.norm_sqr();
        }
    }
    let fw = |k: usize| freq_weights.get(k).copied().unwrap_or(1.0);
    let mut report = NmseReport {
        value: 0.0,
        per_freq: vec![None; n_freq],
        skipped_groups: 0,
    };
    for k in 0..n_freq {
        if !present[k] {
            continue;
        }
        if !(den[k] > 0.0) {
            report.skipped_groups += 1;
            continue;
        }
        let v = num[k] / den[k];
        report.per_freq[k] = Some(v);
        report.value += fw(k) * v;
    }
    if let Some(g) = grads.as_deref_mut() {
        for ((t, p), gj) in targets.iter().zip(preds).zip(g.iter_mut()) {
            let k = t.freq_index;
            if !(den[k] > 0.0) {
                continue;
            }
            for e in &t.entries {
                let d = (e.entry.get(p) - e.value).scale_f64(2.0 * e.weight * fw(k) / den[k]);
                *e.entry.get_mut(gj) = *e.entry.get_mut(gj) + d;
            }
        }
    }
    Ok(report)
}

/// Reflection targets arranged for training: unique bounce points, the
/// targets attached to each, and per-frequency loss weights.
#[derive(Clone, Debug)]
pub struct InversionProblem {
    pub points: Vec<Vec3>,
    pub point_targets: Vec<Vec<usize>>,
    pub targets: Vec<GammaTarget>,
    pub freqs_hz: Vec<f64>,
    pub freq_weights: Vec<f64>,
}

impl InversionProblem {
    pub fn new(set: &TargetSet, weighting: FreqWeighting) -> Result<Self> {
        if set.targets.is_empty() {
            return Err(Error::domain("inversion needs at least one target"));
        }
        let mut index: BTreeMap<[u64; 3], usize> = BTreeMap::new();
        let mut points = Vec::new();
        let mut point_targets: Vec<Vec<usize>> = Vec::new();
        for (ti, t) in set.targets.iter().enumerate() {
            check_theta(t.theta_i)?;
            let key = [t.point.x.to_bits(), t.point.y.to_bits(), t.point.z.to_bits()];
            let pi = *index.entry(key).or_insert_with(|| {
                points.push(t.point);
                point_targets.push(Vec::new());
                points.len() - 1
            });
            point_targets[pi].push(ti);
        }
        Ok(Self {
            points,
            point_targets,
            targets: set.targets.clone(),
            freqs_hz: set.freqs_hz.clone(),
            freq_weights: weighting.weights(&set.freqs_hz),
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }
}

/// Regularization weights of the total objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_hash: f64,
    pub lambda_gate: f64,
}

/// Exact decomposition `total = nmse + lambda_hash * l_hash + lambda_gate * l_gate`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub nmse: f64,
    /// Mean square of all hash embeddings.
    pub l_hash: f64,
    /// Mean post-sigmoid gate value (0 when ungated).
    pub l_gate: f64,
    pub lambda_hash: f64,
    pub lambda_gate: f64,
    pub total: f64,
    pub per_freq: Vec<Option<f64>>,
    pub skipped_groups: usize,
}

/// Predicted Jones matrix for every target attached to `subset` points,
/// in subset order, with the target indices.
pub fn predict_targets(net: &DecoderNet, problem: &InversionProblem, subset: &[usize]) -> Result<(Vec<usize>, Vec<Jones>)> {
    let xs: Vec<Vec3> = subset.iter().map(|&i| problem.points[i]).collect();
    let (y, _) = net.forward_with(net.params(), &xs);
    let mut ids = Vec::new();
    let mut preds = Vec::new();
    for (j, &pi) in subset.iter().enumerate() {
        let p = DispersionParams::new(y[(0, j)], y[(1, j)], y[(2, j)], y[(3, j)]);
        for &ti in &problem.point_targets[pi] {
            let t = &problem.targets[ti];
            ids.push(ti);
            preds.push(reflection_layer(&p, t.theta_i, t.f)?);
        }
    }
    Ok((ids, preds))
}

/// Total objective over the targets of `subset` points with parameters
/// `params`; accumulates its gradient into `grads` when given.
pub fn evaluate_objective(
    net: &DecoderNet,
    params: &[f64],
    problem: &InversionProblem,
    subset: &[usize],
    weights: LossWeights,
    grads: Option<&mut [f64]>,
) -> Result<LossBreakdown> {
    if subset.is_empty() {
        return Err(Error::domain("objective needs at least one point"));
    }
    let xs: Vec<Vec3> = subset.iter().map(|&i| problem.points[i]).collect();
    let (y, cache) = net.forward_with(params, &xs);
    let mut tids = Vec::new();
    let mut preds = Vec::new();
    let mut pvals = Vec::with_capacity(subset.len());
    for (j, &pi) in subset.iter().enumerate() {
        let p = [y[(0, j)], y[(1, j)], y[(2, j)], y[(3, j)]];
        pvals.push(p);
        for &ti in &problem.point_targets[pi] {
            let t = &problem.targets[ti];
            tids.push(ti);
            preds.push(reflection_jones(p, t.theta_i, t.f)?);
        }
    }
    let batch: Vec<GammaTarget> = tids.iter().map(|&i| problem.targets[i].clone()).collect();
    let mut g_pred = vec![Jones::default(); batch.len()];
    let want_grad = grads.is_some();
    let report = nmse_impl(
        &batch,
        &preds,
        &problem.freq_weights,
        if want_grad { Some(&mut g_pred) } else { None },
    )?;

    let emb = &params[net.embedding_range()];
    let l_hash = if emb.is_empty() {
        0.0
    } else {
        emb.iter().map(|v| v * v).sum::<f64>() / emb.len() as f64
    };
    let gate_raw = &params[net.gate_range()];
    let sig: Vec<f64> = gate_raw.iter().map(|g| 1.0 / (1.0 + (-g).exp())).collect();
    let l_gate = if sig.is_empty() {
        0.0
    } else {
        sig.iter().sum::<f64>() / sig.len() as f64
    };

    if let Some(grads) = grads {
        let tape = GradientTape::with_capacity(4096);
        let mut d_out = DMatrix::zeros(4, subset.len());
        let mut k = 0;
        for (j, &pi) in subset.iter().enumerate() {
            let evals: Vec<(f64, f64, Jones)> = problem.point_targets[pi]
                .iter()
                .map(|&ti| {
                    let t = &problem.targets[ti];
                    let e = (t.theta_i, t.f, g_pred[k]);
                    k += 1;
                    e
                })
                .collect();
            let (_, g) = reflection_vjp(&tape, pvals[j], &evals)?;
            for i in 0..4 {
                d_out[(i, j)] = g[i];
            }
        }
        net.backward_with(params, &cache, &d_out, grads);
        if weights.lambda_hash != 0.0 && !emb.is_empty() {
            let c = 2.0 * weights.lambda_hash / emb.len() as f64;
            for (g, v) in grads[net.embedding_range()].iter_mut().zip(emb) {
                *g += c * v;
            }
        }
        if weights.lambda_gate != 0.0 && !sig.is_empty() {
            let c = weights.lambda_gate / sig.len() as f64;
            for (g, s) in grads[net.gate_range()].iter_mut().zip(&sig) {
                *g += c * s * (1.0 - s);
            }
        }
    }
    Ok(LossBreakdown {
        nmse: report.value,
        l_hash,
        l_gate,
        lambda_hash: weights.lambda_hash,
        lambda_gate: weights.lambda_gate,
        total: report.value + weights.lambda_hash * l_hash + weights.lambda_gate * l_gate,
        per_freq: report.per_freq,
        skipped_groups: report.skipped_groups,
    })
}

/// Total objective over every point of the problem.
pub fn total_loss(net: &DecoderNet, problem: &InversionProblem, weights: LossWeights) -> Result<LossBreakdown> {
    let all: Vec<usize> = (0..problem.n_points()).collect();
    evaluate_objective(net, net.params(), problem, &all, weights, None)
}

/// [`total_loss`] and its gradient with respect to all decoder parameters.
pub fn total_loss_grad(net: &DecoderNet, problem: &InversionProblem, weights: LossWeights) -> Result<(LossBreakdown, Vec<f64>)> {
    let all: Vec<usize> = (0..problem.n_points()).collect();
    let mut g = vec![0.0; net.n_params()];
    let l = evaluate_objective(net, net.params(), problem, &all, weights, Some(&mut g))?;
    Ok((l, g))
}
