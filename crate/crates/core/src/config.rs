//! Run configuration: one TOML file with a section per pipeline stage.
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldNetConfig, FieldTrainConfig};
use crate::inversion::{ablation_presets, BaselineConfig, DecoderConfig, InvertTrainConfig, TargetConfig};
use crate::metrics::ReportFormat;
use crate::simulator::SimConfig;

/// The only environment override: replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RFINV_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scene_path: PathBuf,
    /// Defaults to `dataset.jsonl` in the output directory.
    pub dataset_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub simulate: SimConfig,
    pub field: FieldSection,
    pub invert: InvertSection,
    pub baseline: BaselineConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene_path: PathBuf::from("scenes/shoebox.json"),
            dataset_path: None,
            output_dir: PathBuf::from("rfinv-out"),
            simulate: SimConfig::default(),
            field: FieldSection::default(),
            invert: InvertSection::default(),
            baseline: BaselineConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub net: FieldNetConfig,
    pub train: FieldTrainConfig,
    pub init_seed: u64,
    /// Free-space points held out for the relative L2 check.
    pub held_out_samples: usize,
    pub held_out_seed: u64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            net: FieldNetConfig::default(),
            train: FieldTrainConfig::default(),
            init_seed: 7,
            held_out_samples: 1000,
            held_out_seed: 2,
        }
    }
}

/// Inversion settings: a preset, then per-key overrides of its decoder and
/// training tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertSection {
    pub preset: String,
    pub decoder: toml::Table,
    pub train: toml::Table,
    pub targets: TargetConfig,
    /// Use the analytic free-space field instead of the trained field net.
    pub oracle_field: bool,
    /// Standard deviation of the prior-normal perturbation, degrees.
    pub normal_std_deg: f64,
    pub normal_seed: u64,
    pub init_seed: u64,
}

impl Default for InvertSection {
    fn default() -> Self {
        Self {
            preset: "Opt-B".into(),
            decoder: toml::Table::new(),
            train: toml::Table::new(),
            targets: TargetConfig::default(),
            oracle_field: false,
            normal_std_deg: 0.0,
            normal_seed: 0,
            init_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub points_per_facet: usize,
    pub seed: u64,
    pub format: ReportFormat,
    /// Cells per facet side of the material-map grid; 0 disables it.
    pub grid_resolution: usize,
    pub grid_freq_hz: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            points_per_facet: 256,
            seed: 0,
            format: ReportFormat::Json,
            grid_resolution: 32,
            grid_freq_hz: 4e9,
        }
    }
}

/// Preset configuration with the section's overrides applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedInvert {
    pub preset: String,
    pub decoder: DecoderConfig,
    pub train: InvertTrainConfig,
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// `base` with the keys of `overrides` replaced; unknown keys are errors.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(base: &T, overrides: &toml::Table, what: &str) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Validation(vec![format!("{what}: {e}")]))?;
    merge(&mut table, overrides);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Validation(vec![format!("{what}: {e}")]))
}

impl InvertSection {
    pub fn resolve(&self) -> Result<ResolvedInvert> {
        let preset = ablation_presets(&self.preset)?;
        self.resolve_from(&preset.id, &preset.decoder, &preset.train)
    }

    /// Overrides applied to an explicit base instead of the named preset.
    pub fn resolve_from(&self, id: &str, decoder: &DecoderConfig, train: &InvertTrainConfig) -> Result<ResolvedInvert> {
        Ok(ResolvedInvert {
            preset: id.to_string(),
            decoder: apply_overrides(decoder, &self.decoder, "invert.decoder")?,
            train: apply_overrides(train, &self.train, "invert.train")?,
        })
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Reads and validates a config file. `RFINV_OUTPUT_DIR`, when set,
    /// replaces `output_dir`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(vec![format!("config serialization: {e}")]))
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = self.simulate.validate();
        errs.extend(self.field.train.validate());
        if self.field.held_out_samples == 0 {
            errs.push("field.held_out_samples must be at least 1".into());
        }
        match self.invert.resolve() {
            Ok(r) => {
                errs.extend(r.decoder.validate());
                errs.extend(r.train.validate());
            }
            Err(Error::Validation(v)) => errs.extend(v),
            Err(e) => errs.push(e.to_string()),
        }
        if !(self.invert.normal_std_deg >= 0.0 && self.invert.normal_std_deg.is_finite()) {
            errs.push("invert.normal_std_deg must be finite and non-negative".into());
        }
        if !(self.invert.targets.eps_inc_rel >= 0.0) {
            errs.push("invert.targets.eps_inc_rel must be non-negative".into());
        }
        if self.eval.points_per_facet == 0 {
            errs.push("eval.points_per_facet must be at least 1".into());
        }
        if !(self.eval.grid_freq_hz > 0.0 && self.eval.grid_freq_hz.is_finite()) {
            errs.push("eval.grid_freq_hz must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("dataset.jsonl"))
    }

    pub fn field_checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("field.ckpt.json")
    }

    pub fn decoder_checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("decoder.ckpt.json")
    }
}
