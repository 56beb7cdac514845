use serde::{Deserialize, Serialize};

use super::decoder::DecoderConfig;
use super::loss::FreqWeighting;
use super::train::{InvertTrainConfig, LbfgsScope};
use crate::error::{Error, Result};

pub const PRESET_IDS: [&str; 14] = [
    "Arch-0", "Arch-1", "Arch-2", "Arch-3", "Arch-4", "Arch-5", "Arch-6", "Arch-7", "Opt-A", "Opt-B", "Opt-C", "Opt-D",
    "Opt-E", "Opt-F",
];

/// MLP capacity tiers: width and depth.
pub const MEDIUM: (usize, usize) = (256, 6);
pub const HIGH: (usize, usize) = (512, 8);
pub const EXTREME: (usize, usize) = (1024, 8);

/// Share of the Adam epochs over which progressive unfreeze enables levels.
pub const UNFREEZE_FRACTION: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub id: String,
    pub decoder: DecoderConfig,
    pub train: InvertTrainConfig,
}

fn capacity(mut d: DecoderConfig, (w, depth): (usize, usize)) -> DecoderConfig {
    d.width = w;
    d.depth = depth;
    d
}

/// Architecture ablations vary one encoder component of `Arch-0`
/// (PE 16, 10 levels, base resolution 24, 8 features, gates on) at medium
/// capacity; optimization presets vary capacity and training schedule.
pub fn ablation_presets(id: &str) -> Result<Preset> {
    let arch0 = capacity(
        DecoderConfig {
            pe_levels: 16,
            hash_levels: 10,
            base_resolution: 24,
            features_per_level: 8,
            gated: true,
            ..DecoderConfig::default()
        },
        MEDIUM,
    );
    let mut decoder = arch0;
    let mut train = InvertTrainConfig::default();
    match id {
        "Arch-0" => {}
        "Arch-1" => decoder.pe_levels = 10,
        "Arch-2" => decoder.hash_levels = 12,
        "Arch-3" => decoder.base_resolution = 32,
        "Arch-4" => {
            decoder.hash_levels = 12;
            decoder.base_resolution = 32;
        }
        "Arch-5" => decoder.features_per_level = 16,
        "Arch-6" => {
            decoder.hash_levels = 12;
            decoder.features_per_level = 16;
        }
        "Arch-7" => decoder.gated = false,
        "Opt-A" => {}
        "Opt-B" => {
            decoder = capacity(arch0, HIGH);
            train.lbfgs.enabled = true;
        }
        "Opt-C" => {
            decoder = capacity(arch0, EXTREME);
            train.unfreeze_fraction = Some(UNFREEZE_FRACTION);
        }
        "Opt-D" => train.unfreeze_fraction = Some(UNFREEZE_FRACTION),
        "Opt-E" => {
            decoder = capacity(arch0, HIGH);
            train.freq_weighting = FreqWeighting::Linear;
        }
        "Opt-F" => {
            train.lbfgs.enabled = true;
            train.lbfgs.scope = LbfgsScope::MlpOnly;
        }
        other => {
            return Err(Error::UnknownPreset(other.to_string()));
        }
    }
    Ok(Preset {
        id: id.to_string(),
        decoder,
        train,
    })
}
