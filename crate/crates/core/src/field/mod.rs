//! Queryable incident-field network `f(x, d)`.
//!
//! The MLP predicts a frequency-independent transverse amplitude `A(x, d)`
//! in the canonical frame of `d`; the field at frequency `f` is `A` times
//! the free-space carrier from the (known) transmitter position,
//! `propagation_factor(|x - tx|, f)`.

mod train;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::em::propagation_factor;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpCache, MlpSpec, PositionalEncoding};
use crate::numerics::{Complex64, Vec2c};
use crate::scene::{Aabb, Vec3};

pub use train::{
    field_samples, held_out_relative_l2, load_field_checkpoint, save_field_checkpoint, train_field, FieldCheckpoint,
    FieldEpoch, FieldTrainConfig, FieldTrainReport, FIELD_CHECKPOINT_SCHEMA,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldNetConfig {
    pub pe_levels_x: usize,
    pub pe_levels_d: usize,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub activation: Activation,
}

impl Default for FieldNetConfig {
    fn default() -> Self {
        Self {
            pe_levels_x: 2,
            pe_levels_d: 2,
            hidden_width: 64,
            hidden_depth: 3,
            activation: Activation::Silu,
        }
    }
}

/// One supervision triple `(x, d, E_gt)` at frequency `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub x: Vec3,
    pub d: Vec3,
    pub f: f64,
    pub e: Vec2c,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldNet {
    pub config: FieldNetConfig,
    pub bounds: Aabb,
    pub tx_position: Vec3,
    mlp: Mlp,
    params: Vec<f64>,
    frozen: bool,
}

pub struct FieldCache {
    mlp: MlpCache,
}

impl FieldNet {
    pub fn new(config: FieldNetConfig, bounds: Aabb, tx_position: Vec3, seed: u64) -> Self {
        let mlp = Mlp::new(Self::spec(&config));
        let mut params = vec![0.0; mlp.n_params()];
        mlp.init(&mut params, &mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            config,
            bounds,
            tx_position,
            mlp,
            params,
            frozen: false,
        }
    }

    pub(crate) fn from_parts(config: FieldNetConfig, bounds: Aabb, tx_position: Vec3, params: Vec<f64>) -> Result<Self> {
        let mlp = Mlp::new(Self::spec(&config));
        if params.len() != mlp.n_params() {
            return Err(Error::Validation(vec![format!(
                "field checkpoint has {} parameters, architecture needs {}",
                params.len(),
                mlp.n_params()
            )]));
        }
        Ok(Self {
            config,
            bounds,
            tx_position,
            mlp,
            params,
            frozen: true,
        })
    }

    fn spec(c: &FieldNetConfig) -> MlpSpec {
        let n_in = PositionalEncoding::new(c.pe_levels_x).dim_out(3) + PositionalEncoding::new(c.pe_levels_d).dim_out(3);
        MlpSpec {
            n_in,
            width: c.hidden_width,
            depth: c.hidden_depth,
            n_out: 4,
            residual: false,
            skip: false,
            activation: c.activation,
        }
    }

    /// A copy of this network carrying `params` instead; the frozen state
    /// is kept.
    pub fn with_params(&self, params: Vec<f64>) -> Result<FieldNet> {
        let mut net = Self::from_parts(self.config, self.bounds, self.tx_position, params)?;
        net.frozen = self.frozen;
        Ok(net)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub(crate) fn params_mut(&mut self) -> Result<&mut Vec<f64>> {
        if self.frozen {
            return Err(Error::domain("field network is frozen"));
        }
        Ok(&mut self.params)
    }

    /// Isotropic unit-cube coordinates used by the encoder.
    pub fn normalize(&self, x: &Vec3) -> Vec3 {
        let e = self.bounds.extent();
        (x - self.bounds.min_v()) / e.x.max(e.y).max(e.z)
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.bounds.contains(x, 1e-9)
    }

    fn encode(&self, xs: &[Vec3], ds: &[Vec3]) -> DMatrix<f64> {
        let pex = PositionalEncoding::new(self.config.pe_levels_x);
        let ped = PositionalEncoding::new(self.config.pe_levels_d);
        let n = xs.len();
        let xm = DMatrix::from_fn(3, n, |i, j| self.normalize(&xs[j])[i]);
        let dm = DMatrix::from_fn(3, n, |i, j| ds[j][i]);
        let mut input = DMatrix::zeros(self.mlp.spec.n_in, n);
        pex.encode_into(&xm, &mut input, 0);
        ped.encode_into(&dm, &mut input, pex.dim_out(3));
        input
    }

    /// Amplitudes `(Re A_p, Im A_p, Re A_s, Im A_s)` as a `4 x n` matrix.
    pub(crate) fn amplitudes_with(&self, params: &[f64], xs: &[Vec3], ds: &[Vec3]) -> (DMatrix<f64>, FieldCache) {
        let (y, mlp) = self.mlp.forward(params, &self.encode(xs, ds));
        (y, FieldCache { mlp })
    }

    pub(crate) fn amplitudes_backward(&self, params: &[f64], cache: &FieldCache, d_out: &DMatrix<f64>, grads: &mut [f64]) {
        self.mlp.backward(params, &cache.mlp, d_out, grads);
    }

    /// Frequency-independent transverse amplitude at `(x, d)`.
    pub fn amplitude(&self, x: &Vec3, d: &Vec3) -> Vec2c {
        let (y, _) = self.amplitudes_with(&self.params, &[*x], &[*d]);
        Vec2c::new(Complex64::new(y[(0, 0)], y[(1, 0)]), Complex64::new(y[(2, 0)], y[(3, 0)]))
    }

    pub fn carrier(&self, x: &Vec3, f: f64) -> Result<Complex64> {
        propagation_factor((x - self.tx_position).norm(), f)
    }
}

/// Predicted incident field at `x` arriving along unit `d`, frequency `f`,
/// in the canonical transverse frame of `d`.
pub fn field_forward(net: &FieldNet, x: &Vec3, d: &Vec3, f: f64) -> Result<Vec2c> {
    if !net.contains(x) {
        return Err(Error::domain(format!("query point {x:?} outside the scene bounds")));
    }
    if ((d.norm() - 1.0).abs()) > 1e-9 {
        return Err(Error::domain("direction must be a unit vector"));
    }
    let a = net.amplitude(x, d);
    let k = net.carrier(x, f)?;
    Ok(a.scale(k))
}

/// Gradient with respect to the weights of `w . (Re E_p, Im E_p, Re E_s,
/// Im E_s)` where `E = field_forward(net, x, d, f)`.
pub fn field_forward_grad(net: &FieldNet, x: &Vec3, d: &Vec3, f: f64, w: [f64; 4]) -> Result<Vec<f64>> {
    field_forward(net, x, d, f)?;
    let k = net.carrier(x, f)?;
    let (_, cache) = net.amplitudes_with(net.params(), &[*x], &[*d]);
    let mut dy = DMatrix::zeros(4, 1);
    for c in 0..2 {
        let (wr, wi) = (w[2 * c], w[2 * c + 1]);
        dy[(2 * c, 0)] = wr * k.re + wi * k.im;
        dy[(2 * c + 1, 0)] = -wr * k.im + wi * k.re;
    }
    let mut grads = vec![0.0; net.n_params()];
    net.amplitudes_backward(net.params(), &cache, &dy, &mut grads);
    Ok(grads)
}

/// Predicted fields for a batch, one per sample.
pub fn field_forward_batch(net: &FieldNet, xs: &[Vec3], ds: &[Vec3], fs: &[f64]) -> Result<Vec<Vec2c>> {
    if let Some(x) = xs.iter().find(|x| !net.contains(x)) {
        return Err(Error::domain(format!("query point {x:?} outside the scene bounds")));
    }
    let (y, _) = net.amplitudes_with(net.params(), xs, ds);
    xs.iter()
        .zip(fs)
        .enumerate()
        .map(|(j, (x, &f))| {
            let k = net.carrier(x, f)?;
            let a = Vec2c::new(Complex64::new(y[(0, j)], y[(1, j)]), Complex64::new(y[(2, j)], y[(3, j)]));
            Ok(a.scale(k))
        })
        .collect()
}

/// Mean over the batch of the squared complex 2-norm of the field error.
pub fn field_loss(net: &FieldNet, batch: &[FieldSample]) -> Result<f64> {
    field_loss_with(net, net.params(), batch, None)
}

/// Loss and its gradient with respect to the weights.
pub fn field_loss_grad(net: &FieldNet, batch: &[FieldSample]) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; net.n_params()];
    let l = field_loss_with(net, net.params(), batch, Some(&mut g))?;
    Ok((l, g))
}

/// Loss and, if `grads` is given, its gradient accumulated into it.
pub(crate) fn field_loss_with(
    net: &FieldNet,
    params: &[f64],
    batch: &[FieldSample],
    grads: Option<&mut [f64]>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("field loss needs a non-empty batch"));
    }
    let xs: Vec<Vec3> = batch.iter().map(|s| s.x).collect();
    let ds: Vec<Vec3> = batch.iter().map(|s| s.d).collect();
    let (y, cache) = net.amplitudes_with(params, &xs, &ds);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut dy = DMatrix::zeros(4, batch.len());
    for (j, s) in batch.iter().enumerate() {
        let k = net.carrier(&s.x, s.f)?;
        let ap = Complex64::new(y[(0, j)], y[(1, j)]);
        let as_ = Complex64::new(y[(2, j)], y[(3, j)]);
        let rp = ap * k - s.e.p;
        let rs = as_ * k - s.e.s;
        loss += rp.norm_sqr() + rs.norm_sqr();
        // d|A k - e|^2 / d(Re A, Im A) = 2 Re/Im(conj(k) r)
        let gp = k.conj() * rp;
        let gs = k.conj() * rs;
        dy[(0, j)] = 2.0 * gp.re / n;
        dy[(1, j)] = 2.0 * gp.im / n;
        dy[(2, j)] = 2.0 * gs.re / n;
        dy[(3, j)] = 2.0 * gs.im / n;
    }
    if let Some(g) = grads {
        net.amplitudes_backward(params, &cache, &dy, g);
    }
    Ok(loss / n)
}

/// Result of [`field_reg`]: the regularizer and how many points were
/// skipped because their stencil left the scene bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldReg {
    pub value: f64,
    pub skipped: usize,
}

/// Mean over points of the squared spatial gradient of the network output
/// (all 4 reals, 3 axes), by central differences with step `h` metres.
pub fn field_reg(net: &FieldNet, points: &[(Vec3, Vec3)], h: f64) -> Result<FieldReg> {
    field_reg_with(net, net.params(), points, h, None)
}

pub(crate) fn field_reg_with(
    net: &FieldNet,
    params: &[f64],
    points: &[(Vec3, Vec3)],
    h: f64,
    grads: Option<&mut [f64]>,
) -> Result<FieldReg> {
    if points.is_empty() {
        return Err(Error::domain("field regularizer needs a non-empty batch"));
    }
    if !(h > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let mut xs = Vec::with_capacity(points.len() * 6);
    let mut ds = Vec::with_capacity(points.len() * 6);
    let mut skipped = 0;
    for (x, d) in points {
        let stencil: Vec<Vec3> = (0..3)
            .flat_map(|a| {
                let mut e = Vec3::zeros();
                e[a] = h;
                [x + e, x - e]
            })
            .collect();
        if stencil.iter().any(|p| !net.contains(p)) {
            skipped += 1;
            continue;
        }
        for p in stencil {
            xs.push(p);
            ds.push(*d);
        }
    }
    let used = xs.len() / 6;
    if used == 0 {
        return Ok(FieldReg { value: 0.0, skipped });
    }
    let (y, cache) = net.amplitudes_with(params, &xs, &ds);
    let mut dy = DMatrix::zeros(4, xs.len());
    let mut total = 0.0;
    let scale = 1.0 / (2.0 * h);
    for i in 0..used {
        for a in 0..3 {
            let jp = 6 * i + 2 * a;
            let jm = jp + 1;
            for o in 0..4 {
                let g = (y[(o, jp)] - y[(o, jm)]) * scale;
                total += g * g;
                let dg = 2.0 * g * scale / used as f64;
                dy[(o, jp)] += dg;
                dy[(o, jm)] -= dg;
            }
        }
    }
    if let Some(g) = grads {
        net.amplitudes_backward(params, &cache, &dy, g);
    }
    Ok(FieldReg {
        value: total / used as f64,
        skipped,
    })
}
