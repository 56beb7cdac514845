use serde::{Deserialize, Serialize};

use super::ParamGroup;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement needed to reset patience.
    pub threshold: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            factor: 0.5,
            patience: 50,
            threshold: 1e-4,
            min_lr: 1e-6,
        }
    }
}

/// Multiplies every group's learning rate by `factor` once the monitored
/// loss has failed to improve for more than `patience` epochs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReduceLrOnPlateau {
    pub cfg: PlateauConfig,
    best: f64,
    bad_epochs: usize,
}

impl ReduceLrOnPlateau {
    pub fn new(cfg: PlateauConfig) -> Self {
        Self {
            cfg,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Returns true when the rates were reduced.
    pub fn step(&mut self, loss: f64, groups: &mut [ParamGroup]) -> bool {
        if loss < self.best * (1.0 - self.cfg.threshold) {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs <= self.cfg.patience {
            return false;
        }
        self.bad_epochs = 0;
        let mut changed = false;
        for g in groups.iter_mut() {
            let new = (g.lr * self.cfg.factor).max(self.cfg.min_lr);
            if new < g.lr {
                g.lr = new;
                changed = true;
            }
        }
        changed
    }
}
