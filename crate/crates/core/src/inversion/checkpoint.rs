use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decoder::{DecoderConfig, DecoderNet};
use super::loss::LossBreakdown;
use super::train::InvertTrainConfig;
use crate::error::{Error, Result};
use crate::scene::Aabb;

pub const DECODER_CHECKPOINT_SCHEMA: &str = "rfinv-decoder-checkpoint/1";

/// Full hyperparameters, parameters and training metadata of a decoder.
/// Training randomness is a pure function of `train.seed`, so the seed is
/// the whole RNG state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderCheckpoint {
    pub schema: String,
    pub preset: Option<String>,
    pub decoder: DecoderConfig,
    pub bounds: Aabb,
    pub train: InvertTrainConfig,
    pub init_seed: u64,
    pub epochs_completed: usize,
    pub final_loss: LossBreakdown,
    pub params: Vec<f64>,
}

impl DecoderCheckpoint {
    pub fn new(
        net: &DecoderNet,
        preset: Option<&str>,
        train: &InvertTrainConfig,
        init_seed: u64,
        epochs_completed: usize,
        final_loss: LossBreakdown,
    ) -> Self {
        Self {
            schema: DECODER_CHECKPOINT_SCHEMA.into(),
            preset: preset.map(str::to_string),
            decoder: net.config,
            bounds: net.bounds,
            train: train.clone(),
            init_seed,
            epochs_completed,
            final_loss,
            params: net.params().to_vec(),
        }
    }

    pub fn network(&self) -> Result<DecoderNet> {
        DecoderNet::from_params(self.decoder, self.bounds, self.params.clone())
    }
}

pub fn save_decoder_checkpoint(ckpt: &DecoderCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(ckpt).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_decoder_checkpoint(path: impl AsRef<Path>) -> Result<DecoderCheckpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: DecoderCheckpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    if ckpt.schema != DECODER_CHECKPOINT_SCHEMA {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: format!("unsupported checkpoint schema `{}`", ckpt.schema),
        });
    }
    Ok(ckpt)
}
