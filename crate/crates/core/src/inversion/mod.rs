//! Reflection targets from measurements, the material decoder, the
//! differentiable reflection layer and its training, and the entangled-MLP
//! baseline.

mod baseline;
mod checkpoint;
mod decoder;
mod loss;
mod presets;
mod targets;
mod train;

pub use baseline::{
    baseline_materials, fit_dispersion_ls, train_baseline, BaselineConfig, BaselineNet, BaselineReport,
};
pub use checkpoint::{load_decoder_checkpoint, save_decoder_checkpoint, DecoderCheckpoint, DECODER_CHECKPOINT_SCHEMA};
pub use decoder::{
    decoder_forward, decoder_forward_batch, decoder_forward_grad, hash_encode, DecoderCache, DecoderConfig, DecoderNet,
};
pub use loss::{
    evaluate_objective, nmse_loss, nmse_loss_grad, nmse_loss_weighted, predict_targets, reflection_layer,
    reflection_layer_grad, total_loss, total_loss_grad, FreqWeighting, InversionProblem, LossBreakdown, LossWeights,
    NmseReport, MAX_THETA_I,
};
pub use presets::{ablation_presets, Preset, EXTREME, HIGH, MEDIUM, PRESET_IDS, UNFREEZE_FRACTION};
pub use targets::{
    compute_gamma_targets, AnalyticField, GammaEntry, GammaTarget, IncidentField, JonesEntry, TargetConfig,
    TargetDiagnostics, TargetMode, TargetSet,
};
pub use train::{
    adam_phase, lbfgs_phase, train_inversion, AdamOutcome, InvertEpoch, InvertReport, InvertTrainConfig, LbfgsPhase,
    LbfgsScope, Phase,
};
