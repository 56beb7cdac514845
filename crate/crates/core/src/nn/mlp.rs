use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

/// Shape of a fully connected network: `depth` hidden layers of `width`
/// units, then a linear head of `n_out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub n_in: usize,
    pub width: usize,
    pub depth: usize,
    pub n_out: usize,
    /// Hidden layers after the first add their input (`h + act(W h + b)`).
    pub residual: bool,
    /// Concatenate the network input into the middle hidden layer.
    pub skip: bool,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
    hidden: bool,
    residual: bool,
    concat_input: bool,
}

/// Parameter layout and batched forward/backward of an [`MlpSpec`].
/// Parameters live in a caller-owned flat slice; each weight matrix is
/// stored column-major (`n_out x n_in`) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    layers: Vec<Layer>,
    n_params: usize,
}

/// Activations retained for the backward pass.
#[derive(Debug)]
pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Self {
        assert!(spec.depth >= 1 && spec.width >= 1 && spec.n_in >= 1 && spec.n_out >= 1);
        let skip_at = if spec.skip && spec.depth >= 2 { Some(spec.depth / 2) } else { None };
        let mut layers = Vec::new();
        let mut off = 0;
        for l in 0..=spec.depth {
            let hidden = l < spec.depth;
            let concat_input = skip_at == Some(l);
            let n_in = if l == 0 {
                spec.n_in
            } else if concat_input {
                spec.width + spec.n_in
            } else {
                spec.width
            };
            let n_out = if hidden { spec.width } else { spec.n_out };
            let w_off = off;
            off += n_in * n_out;
            let b_off = off;
            off += n_out;
            layers.push(Layer {
                n_in,
                n_out,
                w_off,
                b_off,
                hidden,
                residual: hidden && l > 0 && spec.residual,
                concat_input,
            });
        }
        Self {
            spec,
            layers,
            n_params: off,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        for l in &self.layers {
            let k = 1.0 / (l.n_in as f64).sqrt();
            for v in &mut params[l.w_off..l.b_off + l.n_out] {
                *v = rng.gen_range(-k..k);
            }
        }
    }

    /// Range of the output head's weights and bias in the parameter slice.
    pub fn head_range(&self) -> std::ops::Range<usize> {
        let h = self.layers.last().expect("at least one layer");
        h.w_off..h.b_off + h.n_out
    }

    fn weight<'a>(&self, params: &'a [f64], l: &Layer) -> DMatrixView<'a, f64> {
        DMatrixView::from_slice(&params[l.w_off..l.b_off], l.n_out, l.n_in)
    }

    /// `input` is `n_in x batch`; returns `n_out x batch`.
    pub fn forward(&self, params: &[f64], input: &DMatrix<f64>) -> (DMatrix<f64>, MlpCache) {
        assert_eq!(input.nrows(), self.spec.n_in);
        assert_eq!(params.len(), self.n_params);
        let act = self.spec.activation;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = input.clone();
        for l in &self.layers {
            let x = if l.concat_input {
                let mut m = DMatrix::zeros(l.n_in, h.ncols());
                m.rows_mut(0, h.nrows()).copy_from(&h);
                m.rows_mut(h.nrows(), input.nrows()).copy_from(input);
                m
            } else {
                h.clone()
            };
            let mut z = self.weight(params, l) * &x;
            let b = &params[l.b_off..l.b_off + l.n_out];
            for mut col in z.column_iter_mut() {
                for (v, bi) in col.iter_mut().zip(b) {
                    *v += bi;
                }
            }
            let out = if l.hidden {
                let a = z.map(|v| act.apply(v));
                if l.residual {
                    a + &h
                } else {
                    a
                }
            } else {
                z.clone()
            };
            cache.inputs.push(x);
            cache.pre.push(z);
            h = out;
        }
        (h, cache)
    }

    /// Accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: &DMatrix<f64>, grads: &mut [f64]) -> DMatrix<f64> {
        let act = self.spec.activation;
        let batch = d_out.ncols();
        let mut d_input = DMatrix::zeros(self.spec.n_in, batch);
        let mut dh = d_out.clone();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[li];
            let x = &cache.inputs[li];
            let dz = if l.hidden {
                dh.zip_map(z, |g, zv| g * act.derivative(zv))
            } else {
                dh.clone()
            };
            {
                let mut gw = DMatrixViewMut::from_slice(&mut grads[l.w_off..l.b_off], l.n_out, l.n_in);
                gw.gemm(1.0, &dz, &x.transpose(), 1.0);
            }
            for (gb, row) in grads[l.b_off..l.b_off + l.n_out].iter_mut().zip(dz.row_iter()) {
                *gb += row.sum();
            }
            let dx = self.weight(params, l).tr_mul(&dz);
            let mut d_prev = if l.concat_input {
                let w = dx.nrows() - self.spec.n_in;
                d_input += dx.rows(w, self.spec.n_in);
                dx.rows(0, w).into_owned()
            } else {
                dx
            };
            if l.residual {
                d_prev += &dh;
            }
            if li == 0 {
                d_input += d_prev;
                break;
            }
            dh = d_prev;
        }
        d_input
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, FdConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(residual: bool, skip: bool, activation: Activation) -> MlpSpec {
        MlpSpec {
            n_in: 3,
            width: 6,
            depth: 4,
            n_out: 2,
            residual,
            skip,
            activation,
        }
    }

    fn loss(mlp: &Mlp, p: &[f64], x: &DMatrix<f64>) -> f64 {
        let (y, _) = mlp.forward(p, x);
        y.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v * 0.5).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (res, skip) in [(false, false), (true, false), (true, true)] {
            for act in [Activation::Silu, Activation::Tanh] {
                let mlp = Mlp::new(spec(res, skip, act));
                let mut p = vec![0.0; mlp.n_params()];
                mlp.init(&mut p, &mut rng);
                let x = DMatrix::from_fn(3, 5, |i, j| (i as f64 - j as f64) * 0.3);
                let (y, cache) = mlp.forward(&p, &x);
                let dy = DMatrix::from_fn(2, 5, |i, j| (j * 2 + i + 1) as f64 * y[(i, j)]);
                let mut g = vec![0.0; mlp.n_params()];
                let dx = mlp.backward(&p, &cache, &dy, &mut g);
                let r = finite_diff_check(|q| loss(&mlp, q, &x), &g, &p, FdConfig::with_tol(1e-6));
                assert!(r.pass, "{r:?}");
                let xs: Vec<f64> = x.iter().copied().collect();
                let gx: Vec<f64> = dx.iter().copied().collect();
                let r = finite_diff_check(
                    |v| loss(&mlp, &p, &DMatrix::from_column_slice(3, 5, v)),
                    &gx,
                    &xs,
                    FdConfig::with_tol(1e-6),
                );
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn zero_head_outputs_bias() {
        let mlp = Mlp::new(spec(true, true, Activation::Silu));
        let mut p = vec![0.0; mlp.n_params()];
        mlp.init(&mut p, &mut ChaCha8Rng::seed_from_u64(0));
        for v in &mut p[mlp.head_range()] {
            *v = 0.0;
        }
        let (y, _) = mlp.forward(&p, &DMatrix::from_element(3, 2, 0.7));
        assert!(y.iter().all(|v| *v == 0.0));
    }
}
