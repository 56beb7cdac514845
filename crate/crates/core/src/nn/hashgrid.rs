use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-axis multipliers of the spatial hash.
pub const HASH_PRIMES: [u32; 3] = [2_654_435_761, 805_459_861, 3_674_653_429];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashGridSpec {
    pub levels: usize,
    pub base_resolution: usize,
    pub per_level_scale: f64,
    pub features_per_level: usize,
    pub table_size_log2: u32,
    /// Multiply each level by a learned `sigmoid(g_l)`.
    pub gated: bool,
}

impl HashGridSpec {
    /// Growth factor that takes `base_resolution` to `finest_resolution`
    /// over the configured number of levels.
    pub fn scale_for(base_resolution: usize, finest_resolution: f64, levels: usize) -> f64 {
        if levels <= 1 {
            return 2.0;
        }
        (finest_resolution / base_resolution as f64).powf(1.0 / (levels - 1) as f64)
    }
}

/// Layout of a multiresolution hash encoding over the unit cube. The
/// parameter slice holds all level tables (`entries x features`,
/// row-major) followed by the raw gate values when gated.
#[derive(Clone, Debug, PartialEq)]
pub struct HashGrid {
    pub spec: HashGridSpec,
    resolutions: Vec<usize>,
    table_len: Vec<usize>,
    dense: Vec<bool>,
    offsets: Vec<usize>,
    n_embeddings: usize,
}

/// Corner indices and weights retained for the backward pass.
#[derive(Debug)]
pub struct HashCache {
    /// Per sample, per level: 8 parameter offsets.
    index: Vec<usize>,
    weight: Vec<f64>,
    ungated: DMatrix<f64>,
    active: usize,
    /// Queries that fell outside the unit cube and were clamped.
    pub clamped: usize,
}

impl HashGrid {
    pub fn new(spec: HashGridSpec) -> Self {
        assert!(spec.levels >= 1 && spec.features_per_level >= 1 && spec.base_resolution >= 1);
        let t = 1usize << spec.table_size_log2;
        let mut resolutions = Vec::with_capacity(spec.levels);
        let mut table_len = Vec::new();
        let mut dense = Vec::new();
        let mut offsets = Vec::new();
        let mut off = 0;
        for l in 0..spec.levels {
            let n = (spec.base_resolution as f64 * spec.per_level_scale.powi(l as i32)).floor() as usize;
            if let Some(&prev) = resolutions.last() {
                assert!(n > prev, "hash grid resolutions must strictly increase");
            }
            resolutions.push(n);
            let corners = (n + 1).pow(3);
            let is_dense = corners <= t;
            let len = if is_dense { corners } else { t };
            dense.push(is_dense);
            table_len.push(len);
            offsets.push(off);
            off += len * spec.features_per_level;
        }
        Self {
            spec,
            resolutions,
            table_len,
            dense,
            offsets,
            n_embeddings: off,
        }
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    pub fn dim_out(&self) -> usize {
        self.spec.levels * self.spec.features_per_level
    }

    pub fn n_embeddings(&self) -> usize {
        self.n_embeddings
    }

    pub fn n_gates(&self) -> usize {
        if self.spec.gated {
            self.spec.levels
        } else {
            0
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_embeddings + self.n_gates()
    }

    /// Embeddings uniform in `+-1e-4`, raw gates 0 (gate value 0.5).
    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        for v in &mut params[..self.n_embeddings] {
            *v = rng.gen_range(-1e-4..1e-4);
        }
        for v in &mut params[self.n_embeddings..self.n_params()] {
            *v = 0.0;
        }
    }

    /// Post-sigmoid gate values (all 1 when ungated).
    pub fn gate_values(&self, params: &[f64]) -> Vec<f64> {
        (0..self.spec.levels)
            .map(|l| {
                if self.spec.gated {
                    1.0 / (1.0 + (-params[self.n_embeddings + l]).exp())
                } else {
                    1.0
                }
            })
            .collect()
    }

    fn slot(&self, level: usize, c: [usize; 3]) -> usize {
        let n1 = self.resolutions[level] + 1;
        let i = if self.dense[level] {
            c[0] + n1 * (c[1] + n1 * c[2])
        } else {
            let h = (c[0] as u32).wrapping_mul(HASH_PRIMES[0])
                ^ (c[1] as u32).wrapping_mul(HASH_PRIMES[1])
                ^ (c[2] as u32).wrapping_mul(HASH_PRIMES[2]);
            h as usize & (self.table_len[level] - 1)
        };
        self.offsets[level] + i * self.spec.features_per_level
    }

    /// Encodes unit-cube points (`3 x batch`). Levels at or beyond `active`
    /// output zeros.
    pub fn encode(&self, params: &[f64], x: &DMatrix<f64>, active: usize) -> (DMatrix<f64>, HashCache) {
        assert_eq!(x.nrows(), 3);
        let active = active.min(self.spec.levels);
        let f = self.spec.features_per_level;
        let nl = self.spec.levels;
        let batch = x.ncols();
        let gates = self.gate_values(params);
        let mut out = DMatrix::zeros(self.dim_out(), batch);
        let mut ungated = DMatrix::zeros(self.dim_out(), batch);
        let mut index = vec![0usize; batch * nl * 8];
        let mut weight = vec![0.0; batch * nl * 8];
        let mut clamped = 0;
        for j in 0..batch {
            let mut p = [x[(0, j)], x[(1, j)], x[(2, j)]];
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                clamped += 1;
                for v in &mut p {
                    *v = v.clamp(0.0, 1.0);
                }
            }
            for l in 0..active {
                let n = self.resolutions[l];
                let mut cell = [0usize; 3];
                let mut frac = [0.0; 3];
                for a in 0..3 {
                    let pos = p[a] * n as f64;
                    let c = (pos.floor() as usize).min(n - 1);
                    cell[a] = c;
                    frac[a] = pos - c as f64;
                }
                let base = (j * nl + l) * 8;
                for corner in 0..8 {
                    let bit = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                    let mut w = 1.0;
                    let mut c = cell;
                    for a in 0..3 {
                        c[a] += bit[a];
                        w *= if bit[a] == 1 { frac[a] } else { 1.0 - frac[a] };
                    }
                    let s = self.slot(l, c);
                    index[base + corner] = s;
                    weight[base + corner] = w;
                    for k in 0..f {
                        ungated[(l * f + k, j)] += w * params[s + k];
                    }
                }
                for k in 0..f {
                    out[(l * f + k, j)] = gates[l] * ungated[(l * f + k, j)];
                }
            }
        }
        (
            out,
            HashCache {
                index,
                weight,
                ungated,
                active,
                clamped,
            },
        )
    }

    /// Accumulates gradients of embeddings and raw gates into `grads`.
    pub fn backward(&self, params: &[f64], cache: &HashCache, d_out: &DMatrix<f64>, grads: &mut [f64]) {
        let f = self.spec.features_per_level;
        let nl = self.spec.levels;
        let gates = self.gate_values(params);
        for j in 0..d_out.ncols() {
            for l in 0..cache.active {
                let base = (j * nl + l) * 8;
                let mut dgate = 0.0;
                for k in 0..f {
                    let g = d_out[(l * f + k, j)];
                    dgate += g * cache.ungated[(l * f + k, j)];
                    let ge = g * gates[l];
                    if ge != 0.0 {
                        for corner in 0..8 {
                            grads[cache.index[base + corner] + k] += ge * cache.weight[base + corner];
                        }
                    }
                }
                if self.spec.gated {
                    let s = gates[l];
                    grads[self.n_embeddings + l] += dgate * s * (1.0 - s);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, FdConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(log2: u32) -> HashGrid {
        HashGrid::new(HashGridSpec {
            levels: 3,
            base_resolution: 4,
            per_level_scale: 2.0,
            features_per_level: 2,
            table_size_log2: log2,
            gated: true,
        })
    }

    #[test]
    fn resolutions_increase_and_dense_levels_fit() {
        let g = grid(8);
        assert_eq!(g.resolutions(), &[4, 8, 16]);
        // 5^3 = 125 fits in 256, 9^3 = 729 does not
        assert_eq!(g.n_embeddings(), (125 + 256 + 256) * 2);
    }

    #[test]
    fn vertex_query_returns_gated_embedding() {
        let g = grid(8);
        let mut p = vec![0.0; g.n_params()];
        g.init(&mut p, &mut ChaCha8Rng::seed_from_u64(3));
        let x = DMatrix::from_column_slice(3, 1, &[0.25, 0.5, 0.75]);
        let (y, _) = g.encode(&p, &x, 3);
        // level 0 (res 4) vertex (1, 2, 3)
        let s = g.slot(0, [1, 2, 3]);
        assert!((y[(0, 0)] - 0.5 * p[s]).abs() < 1e-18);
        assert!((y[(1, 0)] - 0.5 * p[s + 1]).abs() < 1e-18);
    }

    #[test]
    fn edge_midpoint_averages_two_corners() {
        let g = grid(8);
        let mut p = vec![0.0; g.n_params()];
        g.init(&mut p, &mut ChaCha8Rng::seed_from_u64(4));
        let x = DMatrix::from_column_slice(3, 1, &[0.125, 0.5, 0.75]);
        let (y, _) = g.encode(&p, &x, 1);
        let a = g.slot(0, [0, 2, 3]);
        let b = g.slot(0, [1, 2, 3]);
        assert!((y[(0, 0)] - 0.5 * 0.5 * (p[a] + p[b])).abs() < 1e-18);
        assert_eq!(y[(2, 0)], 0.0, "inactive level is zero");
    }

    #[test]
    fn weights_sum_to_one() {
        let g = grid(10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(3, 50, |_, _| rng.gen::<f64>());
        let p = vec![0.0; g.n_params()];
        let (_, cache) = g.encode(&p, &x, 3);
        for chunk in cache.weight.chunks(8) {
            assert!((chunk.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = grid(6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = vec![0.0; g.n_params()];
        for v in &mut p {
            *v = rng.gen_range(-1.0..1.0);
        }
        let x = DMatrix::from_fn(3, 7, |_, _| rng.gen::<f64>());
        let w = DMatrix::from_fn(6, 7, |_, _| rng.gen_range(-1.0..1.0));
        let loss = |q: &[f64]| {
            let (y, _) = g.encode(q, &x, 3);
            y.component_mul(&y).component_mul(&w).sum()
        };
        let (y, cache) = g.encode(&p, &x, 3);
        let dy = (y.component_mul(&w)) * 2.0;
        let mut grads = vec![0.0; g.n_params()];
        g.backward(&p, &cache, &dy, &mut grads);
        let r = finite_diff_check(loss, &grads, &p, FdConfig::with_tol(1e-5));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn out_of_cube_is_clamped_and_counted() {
        let g = grid(8);
        let p = vec![0.0; g.n_params()];
        let x = DMatrix::from_column_slice(3, 2, &[1.2, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let (_, cache) = g.encode(&p, &x, 3);
        assert_eq!(cache.clamped, 1);
    }
}
