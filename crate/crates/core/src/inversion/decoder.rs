use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::em::{DispersionParams, PARAM_BOUNDS};
use crate::error::{Error, Result};
use crate::nn::{Activation, HashCache, HashGrid, HashGridSpec, Mlp, MlpCache, MlpSpec, PositionalEncoding};
use crate::scene::{Aabb, Vec3};

/// Decoder hyperparameters. The hash growth factor is derived from the
/// scene so that the finest level reaches `finest_voxel_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub pe_levels: usize,
    pub hash_levels: usize,
    pub base_resolution: usize,
    pub features_per_level: usize,
    pub table_size_log2: u32,
    pub gated: bool,
    pub finest_voxel_m: f64,
    pub width: usize,
    pub depth: usize,
    /// Concatenate the input features into the middle hidden layer.
    pub skip: bool,
    pub activation: Activation,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            pe_levels: 16,
            hash_levels: 10,
            base_resolution: 24,
            features_per_level: 8,
            table_size_log2: 19,
            gated: true,
            finest_voxel_m: 0.02,
            width: 256,
            depth: 6,
            skip: true,
            activation: Activation::Silu,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.hash_levels == 0 || self.features_per_level == 0 || self.base_resolution == 0 {
            e.push("hash levels, features and base resolution must be positive".into());
        }
        if self.width == 0 || self.depth == 0 {
            e.push("decoder width and depth must be positive".into());
        }
        if !(self.finest_voxel_m > 0.0) {
            e.push("finest_voxel_m must be positive".into());
        }
        if self.table_size_log2 == 0 || self.table_size_log2 > 26 {
            e.push("table_size_log2 must be in 1..=26".into());
        }
        e
    }

    pub fn hash_spec(&self, bounds: &Aabb) -> HashGridSpec {
        let e = bounds.extent();
        let finest = e.x.max(e.y).max(e.z) / self.finest_voxel_m;
        let mut scale = HashGridSpec::scale_for(self.base_resolution, finest, self.hash_levels);
        // resolutions must strictly increase after flooring
        if self.hash_levels > 1 {
            let min_scale = (self.base_resolution as f64 + 1.0) / self.base_resolution as f64;
            scale = scale.max(min_scale + 1e-9);
        }
        HashGridSpec {
            levels: self.hash_levels,
            base_resolution: self.base_resolution,
            per_level_scale: scale,
            features_per_level: self.features_per_level,
            table_size_log2: self.table_size_log2,
            gated: self.gated,
        }
    }
}

/// Material decoder: sinusoidal encoding and gated hash features of the
/// normalized position, a residual MLP, and a sigmoid head mapped into the
/// dispersion parameter bounds. Parameters are laid out as
/// `[mlp | hash embeddings | gates]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderNet {
    pub config: DecoderConfig,
    pub bounds: Aabb,
    pe: PositionalEncoding,
    hash: HashGrid,
    mlp: Mlp,
    params: Vec<f64>,
    /// Hash levels that currently contribute (coarse to fine).
    pub active_levels: usize,
}

pub struct DecoderCache {
    unit: DMatrix<f64>,
    hash: HashCache,
    mlp: MlpCache,
    sig: DMatrix<f64>,
}

impl DecoderNet {
    pub fn new(config: DecoderConfig, bounds: Aabb, seed: u64) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let mut net = Self::layout(config, bounds);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_mlp = net.mlp.n_params();
        net.mlp.init(&mut net.params[..n_mlp], &mut rng);
        net.hash.init(&mut net.params[n_mlp..], &mut rng);
        Ok(net)
    }

    fn layout(config: DecoderConfig, bounds: Aabb) -> Self {
        let pe = PositionalEncoding::new(config.pe_levels);
        let hash = HashGrid::new(config.hash_spec(&bounds));
        let mlp = Mlp::new(MlpSpec {
            n_in: pe.dim_out(3) + hash.dim_out(),
            width: config.width,
            depth: config.depth,
            n_out: 4,
            residual: true,
            skip: config.skip,
            activation: config.activation,
        });
        let n = mlp.n_params() + hash.n_params();
        Self {
            config,
            bounds,
            pe,
            active_levels: config.hash_levels,
            hash,
            mlp,
            params: vec![0.0; n],
        }
    }

    pub fn from_params(config: DecoderConfig, bounds: Aabb, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::layout(config, bounds);
        if params.len() != net.params.len() {
            return Err(Error::Validation(vec![format!(
                "decoder has {} parameters, architecture needs {}",
                params.len(),
                net.params.len()
            )]));
        }
        net.params = params;
        Ok(net)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn mlp_range(&self) -> Range<usize> {
        0..self.mlp.n_params()
    }

    pub fn head_range(&self) -> Range<usize> {
        self.mlp.head_range()
    }

    pub fn embedding_range(&self) -> Range<usize> {
        let s = self.mlp.n_params();
        s..s + self.hash.n_embeddings()
    }

    pub fn gate_range(&self) -> Range<usize> {
        let s = self.embedding_range().end;
        s..s + self.hash.n_gates()
    }

    pub fn hash_range(&self) -> Range<usize> {
        self.mlp.n_params()..self.params.len()
    }

    pub fn hash_grid(&self) -> &HashGrid {
        &self.hash
    }

    /// Post-sigmoid level gates (all 1 when ungated).
    pub fn gate_values(&self) -> Vec<f64> {
        self.hash.gate_values(&self.params[self.hash_range()])
    }

    pub fn normalize(&self, x: &Vec3) -> Vec3 {
        let e = self.bounds.extent();
        (x - self.bounds.min_v()) / e.x.max(e.y).max(e.z)
    }

    /// Forward pass with explicit parameters; returns `4 x n` bounded
    /// outputs `(a, b, c, d)`.
    pub fn forward_with(&self, params: &[f64], xs: &[Vec3]) -> (DMatrix<f64>, DecoderCache) {
        let n = xs.len();
        let n_mlp = self.mlp.n_params();
        let unit = DMatrix::from_fn(3, n, |i, j| self.normalize(&xs[j])[i]);
        let pe_dim = self.pe.dim_out(3);
        let mut input = DMatrix::zeros(self.mlp.spec.n_in, n);
        self.pe.encode_into(&unit, &mut input, 0);
        let (hf, hash) = self.hash.encode(&params[n_mlp..], &unit, self.active_levels);
        input.rows_mut(pe_dim, hf.nrows()).copy_from(&hf);
        let (raw, mlp) = self.mlp.forward(&params[..n_mlp], &input);
        let sig = raw.map(|z| 1.0 / (1.0 + (-z).exp()));
        let out = DMatrix::from_fn(4, n, |i, j| {
            let (lo, hi) = PARAM_BOUNDS[i];
            lo + (hi - lo) * sig[(i, j)]
        });
        (out, DecoderCache { unit, hash, mlp, sig })
    }

    /// Accumulates parameter gradients given `d_out` (`4 x n`, gradient of
    /// the loss with respect to the bounded outputs).
    pub fn backward_with(&self, params: &[f64], cache: &DecoderCache, d_out: &DMatrix<f64>, grads: &mut [f64]) {
        let n_mlp = self.mlp.n_params();
        let d_raw = DMatrix::from_fn(4, d_out.ncols(), |i, j| {
            let (lo, hi) = PARAM_BOUNDS[i];
            let s = cache.sig[(i, j)];
            d_out[(i, j)] * (hi - lo) * s * (1.0 - s)
        });
        let (gm, gh) = grads.split_at_mut(n_mlp);
        let d_in = self.mlp.backward(&params[..n_mlp], &cache.mlp, &d_raw, gm);
        let pe_dim = self.pe.dim_out(3);
        let d_hash = d_in.rows(pe_dim, self.hash.dim_out()).into_owned();
        self.hash.backward(&params[n_mlp..], &cache.hash, &d_hash, gh);
    }

    /// Number of queries in the cache that fell outside the scene bounds.
    pub fn clamped(cache: &DecoderCache) -> usize {
        cache.hash.clamped
    }

    /// Normalized query positions held by the cache.
    pub fn cache_points(cache: &DecoderCache) -> &DMatrix<f64> {
        &cache.unit
    }
}

/// Decoded dispersion parameters at `x`. Positions outside the bounds are
/// clamped onto them by the hash encoder.
pub fn decoder_forward(net: &DecoderNet, x: &Vec3) -> DispersionParams {
    let (y, _) = net.forward_with(net.params(), &[*x]);
    DispersionParams::new(y[(0, 0)], y[(1, 0)], y[(2, 0)], y[(3, 0)])
}

pub fn decoder_forward_batch(net: &DecoderNet, xs: &[Vec3]) -> Vec<DispersionParams> {
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(4096) {
        let (y, _) = net.forward_with(net.params(), chunk);
        out.extend((0..chunk.len()).map(|j| DispersionParams::new(y[(0, j)], y[(1, j)], y[(2, j)], y[(3, j)])));
    }
    out
}

/// Gradient with respect to the weights of `w . (a, b, c, d)` at `x`.
pub fn decoder_forward_grad(net: &DecoderNet, x: &Vec3, w: [f64; 4]) -> Vec<f64> {
    let (_, cache) = net.forward_with(net.params(), &[*x]);
    let d = DMatrix::from_column_slice(4, 1, &w);
    let mut g = vec![0.0; net.n_params()];
    net.backward_with(net.params(), &cache, &d, &mut g);
    g
}

/// Gated multiresolution hash features at `x`, and whether `x` had to be
/// clamped into the bounds.
pub fn hash_encode(net: &DecoderNet, x: &Vec3) -> (Vec<f64>, bool) {
    let unit = net.normalize(x);
    let m = DMatrix::from_column_slice(3, 1, unit.as_slice());
    let (y, cache) = net.hash.encode(&net.params[net.hash_range()], &m, net.active_levels);
    (y.iter().copied().collect(), cache.clamped > 0)
}
