use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A contiguous slice of the flat parameter vector sharing one learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
    pub lr: f64,
    /// Frozen groups are skipped by the update (moments are left untouched).
    pub frozen: bool,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, range: Range<usize>, lr: f64) -> Self {
        Self {
            name: name.into(),
            range,
            lr,
            frozen: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self::with_eps(n, 1e-8)
    }

    pub fn with_eps(n: usize, eps: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], groups: &[ParamGroup]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for g in groups.iter().filter(|g| !g.frozen) {
            let step = g.lr / bc1;
            for i in g.range.clone() {
                let gi = grads[i];
                let m = self.beta1 * self.m[i] + (1.0 - self.beta1) * gi;
                let v = self.beta2 * self.v[i] + (1.0 - self.beta2) * gi * gi;
                self.m[i] = m;
                self.v[i] = v;
                params[i] -= step * m / ((v / bc2).sqrt() + self.eps);
            }
        }
    }
}
