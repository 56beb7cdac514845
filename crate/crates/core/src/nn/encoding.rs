use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Sinusoidal encoding `[x, sin(2^k pi x), cos(2^k pi x)]` for
/// `k = 0..levels`, applied per input coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PositionalEncoding {
    pub levels: usize,
}

impl PositionalEncoding {
    pub fn new(levels: usize) -> Self {
        Self { levels }
    }

    pub fn dim_out(&self, dim_in: usize) -> usize {
        dim_in * (1 + 2 * self.levels)
    }

    /// Encodes the columns of `x` (`dim_in x batch`), writing rows starting
    /// at `row0` of `out`.
    pub fn encode_into(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>, row0: usize) {
        let d = x.nrows();
        for (j, col) in x.column_iter().enumerate() {
            for i in 0..d {
                out[(row0 + i, j)] = col[i];
            }
            for k in 0..self.levels {
                let w = (1u64 << k) as f64 * PI;
                for i in 0..d {
                    let (s, c) = (w * col[i]).sin_cos();
                    out[(row0 + d + 2 * k * d + i, j)] = s;
                    out[(row0 + d + (2 * k + 1) * d + i, j)] = c;
                }
            }
        }
    }

    pub fn encode(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim_out(x.nrows()), x.ncols());
        self.encode_into(x, &mut out, 0);
        out
    }

    /// Gradient with respect to `x` given the gradient of the encoding
    /// (rows `row0..` of `d_out`).
    pub fn backward(&self, x: &DMatrix<f64>, d_out: &DMatrix<f64>, row0: usize) -> DMatrix<f64> {
        let d = x.nrows();
        DMatrix::from_fn(d, x.ncols(), |i, j| {
            let mut g = d_out[(row0 + i, j)];
            for k in 0..self.levels {
                let w = (1u64 << k) as f64 * PI;
                let (s, c) = (w * x[(i, j)]).sin_cos();
                g += d_out[(row0 + d + 2 * k * d + i, j)] * w * c;
                g -= d_out[(row0 + d + (2 * k + 1) * d + i, j)] * w * s;
            }
            g
        })
    }
}
