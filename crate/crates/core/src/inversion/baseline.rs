use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{nmse_loss_grad, reflection_layer, reflection_layer_grad, InversionProblem};
use super::targets::GammaTarget;
use crate::em::{DispersionParams, PARAM_BOUNDS};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpSpec, PositionalEncoding};
use crate::numerics::{Complex64, Jones};
use crate::optim::{lbfgs_minimize, Adam, LbfgsConfig, ParamGroup, PlateauConfig, ReduceLrOnPlateau};
use crate::scene::{Aabb, Vec3};

/// Entangled baseline: one MLP from `PE(x) ++ normalized f` straight to
/// the 8 reals of a Jones matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub pe_levels: usize,
    pub width: usize,
    pub depth: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Targets per minibatch.
    pub batch: usize,
    pub plateau: PlateauConfig,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            pe_levels: 10,
            width: 256,
            depth: 8,
            lr: 1e-3,
            epochs: 2000,
            batch: 32768,
            plateau: PlateauConfig {
                factor: 0.5,
                patience: 50,
                min_lr: 1e-6,
                ..PlateauConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineNet {
    pub config: BaselineConfig,
    pub bounds: Aabb,
    pub f_range: (f64, f64),
    /// Frequency grid of the training data.
    pub freqs_hz: Vec<f64>,
    pe: PositionalEncoding,
    mlp: Mlp,
    params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    /// Mean minibatch NMSE per epoch.
    pub history: Vec<f64>,
    pub final_nmse: f64,
}

impl BaselineNet {
    pub fn new(config: BaselineConfig, bounds: Aabb, freqs_hz: &[f64]) -> Result<Self> {
        if config.width == 0 || config.depth == 0 || !(config.lr > 0.0) || config.batch == 0 {
            return Err(Error::Validation(vec![
                "baseline width, depth, batch and lr must be positive".into(),
            ]));
        }
        let fmin = freqs_hz.iter().copied().fold(f64::INFINITY, f64::min);
        let fmax = freqs_hz.iter().copied().fold(0.0, f64::max);
        if !(fmin > 0.0) {
            return Err(Error::domain("baseline needs a positive frequency grid"));
        }
        let pe = PositionalEncoding::new(config.pe_levels);
        let mlp = Mlp::new(MlpSpec {
            n_in: pe.dim_out(3) + 1,
            width: config.width,
            depth: config.depth,
            n_out: 8,
            residual: false,
            skip: false,
            activation: Activation::Silu,
        });
        let mut params = vec![0.0; mlp.n_params()];
        mlp.init(&mut params, &mut ChaCha8Rng::seed_from_u64(config.seed));
        Ok(Self {
            config,
            bounds,
            f_range: (fmin, fmax),
            freqs_hz: freqs_hz.to_vec(),
            pe,
            mlp,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn input(&self, xs: &[Vec3], fs: &[f64]) -> DMatrix<f64> {
        let e = self.bounds.extent();
        let scale = e.x.max(e.y).max(e.z);
        let unit = DMatrix::from_fn(3, xs.len(), |i, j| (xs[j] - self.bounds.min_v())[i] / scale);
        let mut input = DMatrix::zeros(self.mlp.spec.n_in, xs.len());
        self.pe.encode_into(&unit, &mut input, 0);
        let row = self.pe.dim_out(3);
        let (lo, hi) = self.f_range;
        for (j, &f) in fs.iter().enumerate() {
            input[(row, j)] = if hi > lo { (f - lo) / (hi - lo) } else { 0.0 };
        }
        input
    }

    fn to_jones(y: &DMatrix<f64>, j: usize) -> Jones {
        let c = |k: usize| Complex64::new(y[(2 * k, j)], y[(2 * k + 1, j)]);
        Jones::new(c(0), c(1), c(2), c(3))
    }

    /// Predicted Jones matrices for `(x, f)` pairs.
    pub fn predict(&self, xs: &[Vec3], fs: &[f64]) -> Vec<Jones> {
        let (y, _) = self.mlp.forward(&self.params, &self.input(xs, fs));
        (0..xs.len()).map(|j| Self::to_jones(&y, j)).collect()
    }
}

/// Adam with plateau decay on the same frequency-grouped NMSE as the
/// decoder, over shuffled target minibatches.
pub fn train_baseline(mut net: BaselineNet, problem: &InversionProblem) -> Result<(BaselineNet, BaselineReport)> {
    let cfg = net.config;
    let n = net.params.len();
    let mut adam = Adam::new(n);
    let mut groups = vec![ParamGroup::new("mlp", 0..n, cfg.lr)];
    let mut plateau = ReduceLrOnPlateau::new(cfg.plateau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let targets = &problem.targets;
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grads = vec![0.0; n];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<GammaTarget> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let xs: Vec<Vec3> = batch.iter().map(|t| t.point).collect();
            let fs: Vec<f64> = batch.iter().map(|t| t.f).collect();
            let (y, cache) = net.mlp.forward(&net.params, &net.input(&xs, &fs));
            let preds: Vec<Jones> = (0..batch.len()).map(|j| BaselineNet::to_jones(&y, j)).collect();
            let (r, g) = nmse_loss_grad(&batch, &preds, &problem.freq_weights)?;
            if !r.value.is_finite() {
                return Err(Error::Numerical(format!("baseline loss not finite at epoch {epoch}")));
            }
            let d = DMatrix::from_fn(8, batch.len(), |i, j| {
                let c = [g[j].pp, g[j].ps, g[j].sp, g[j].ss][i / 2];
                if i % 2 == 0 {
                    c.re
                } else {
                    c.im
                }
            });
            grads.iter_mut().for_each(|v| *v = 0.0);
            net.mlp.backward(&net.params, &cache, &d, &mut grads);
            adam.step(&mut net.params, &grads, &groups);
            sum += r.value;
            batches += 1;
        }
        let mean = sum / batches as f64;
        history.push(mean);
        plateau.step(mean, &mut groups);
    }
    let xs: Vec<Vec3> = targets.iter().map(|t| t.point).collect();
    let fs: Vec<f64> = targets.iter().map(|t| t.f).collect();
    let preds = net.predict(&xs, &fs);
    let final_nmse = nmse_loss_grad(targets, &preds, &problem.freq_weights)?.0.value;
    Ok((net, BaselineReport { history, final_nmse }))
}

fn bounded(u: &[f64]) -> DispersionParams {
    let p: Vec<f64> = (0..4)
        .map(|i| {
            let (lo, hi) = PARAM_BOUNDS[i];
            lo + (hi - lo) / (1.0 + (-u[i]).exp())
        })
        .collect();
    DispersionParams::new(p[0], p[1], p[2], p[3])
}

fn unbounded(p: &DispersionParams) -> Vec<f64> {
    p.to_array()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (lo, hi) = PARAM_BOUNDS[i];
            let s = ((v - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
            (s / (1.0 - s)).ln()
        })
        .collect()
}

/// Dispersion parameters whose diagonal reflection best matches the given
/// `(theta_i, f, Jones)` responses in least squares, within the parameter
/// bounds. Several starts; returns the best fit and its residual.
pub fn fit_dispersion_ls(samples: &[(f64, f64, Jones)]) -> Result<(DispersionParams, f64)> {
    if samples.is_empty() {
        return Err(Error::domain("least-squares fit needs samples"));
    }
    let objective = |u: &[f64]| -> (f64, Vec<f64>) {
        let p = bounded(u);
        let mut val = 0.0;
        let mut gp = [0.0; 4];
        for &(theta, f, target) in samples {
            let r = match reflection_layer(&p, theta, f) {
                Ok(r) => r,
                Err(_) => return (f64::NAN, vec![0.0; 4]),
            };
            let dp = r.pp - target.pp;
            let ds = r.ss - target.ss;
            val += dp.norm_sqr() + ds.norm_sqr();
            let w = Jones::new(dp.scale_f64(2.0), Complex64::ZERO, Complex64::ZERO, ds.scale_f64(2.0));
            if let Ok((_, g)) = reflection_layer_grad(&p, theta, f, &w) {
                for i in 0..4 {
                    gp[i] += g[i];
                }
            }
        }
        let grad = (0..4)
            .map(|i| {
                let (lo, hi) = PARAM_BOUNDS[i];
                let s = 1.0 / (1.0 + (-u[i]).exp());
                gp[i] * (hi - lo) * s * (1.0 - s)
            })
            .collect();
        (val, grad)
    };
    let cfg = LbfgsConfig {
        max_iter: 200,
        max_evals: 300,
        history: 10,
        ..LbfgsConfig::default()
    };
    let mut best: Option<(DispersionParams, f64)> = None;
    for a in [1.5, 3.0, 6.0, 10.0] {
        for c in [0.01, 0.3] {
            let mut u = unbounded(&DispersionParams::new(a, 0.0, c, 0.0));
            let rep = lbfgs_minimize(&mut u, objective, &cfg);
            if rep.f_final.is_finite() && best.as_ref().map_or(true, |b| rep.f_final < b.1) {
                best = Some((bounded(&u), rep.f_final));
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("least-squares dispersion fit failed".into()))
}

/// Materials implied by the baseline at evaluation points: its Jones
/// predictions over `freqs_hz` at incidence `theta_i`, decoded by
/// [`fit_dispersion_ls`].
pub fn baseline_materials(net: &BaselineNet, points: &[(Vec3, f64)], freqs_hz: &[f64]) -> Result<Vec<DispersionParams>> {
    points
        .iter()
        .map(|(x, theta)| {
            let xs = vec![*x; freqs_hz.len()];
            let preds = net.predict(&xs, freqs_hz);
            let samples: Vec<(f64, f64, Jones)> = freqs_hz.iter().zip(preds).map(|(&f, j)| (*theta, f, j)).collect();
            fit_dispersion_ls(&samples).map(|(p, _)| p)
        })
        .collect()
}
