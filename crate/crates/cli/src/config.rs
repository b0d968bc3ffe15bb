use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tdekit_core::dataset::GenerationConfig;
use tdekit_core::eval::SweepSettings;
use tdekit_neural::{ModelConfig, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferSettings {
    pub window: usize,
    pub overlap: f64,
    /// Rate GCC-PHAT runs at when no checkpoint fixes it.
    pub sample_rate_hz: u32,
}

impl Default for InferSettings {
    fn default() -> Self {
        Self {
            window: 10_000,
            overlap: 5.0 / 6.0,
            sample_rate_hz: 16_000,
        }
    }
}

/// Every setting a subcommand can read. The master `seed` drives dataset
/// generation, training and sweeps; the nested `seed` keys mirror it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub sweep: SweepSettings,
    pub inference: InferSettings,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (generation, model, training) = match preset {
            Preset::Desk => (GenerationConfig::desk(), ModelConfig::desk(), TrainConfig::desk()),
            Preset::Paper => (GenerationConfig::paper(), ModelConfig::paper(), TrainConfig::paper()),
        };
        Self {
            seed: 0,
            dataset: None,
            checkpoint: None,
            sources: None,
            output: None,
            generation,
            model,
            training,
            sweep: SweepSettings::default(),
            inference: InferSettings::default(),
        }
    }

    /// Preset defaults overlaid with the JSON object in `file`, if any.
    pub fn load(preset: Preset, file: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = Self::preset(preset);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
            cfg = cfg.overlay(&overlay)?;
        }
        Ok(cfg)
    }

    pub fn overlay(&self, overlay: &Value) -> Result<Self, CliError> {
        for nested in ["training", "sweep"] {
            if overlay.get(nested).and_then(|v| v.get("seed")).is_some() {
                return Err(CliError::usage(format!(
                    "config key {nested}.seed is not settable; use the top-level seed"
                )));
            }
        }
        let mut base = serde_json::to_value(self).expect("config serialises");
        merge(&mut base, overlay, "")?;
        serde_json::from_value(base).map_err(|e| CliError::usage(format!("invalid config: {e}")))
    }

    /// Propagates the master seed into the nested settings.
    pub fn sync_seeds(&mut self) {
        self.training.seed = self.seed;
        self.sweep.seed = self.seed;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Recursive object merge. Keys absent from `base` are rejected.
fn merge(base: &mut Value, overlay: &Value, at: &str) -> Result<(), CliError> {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(CliError::usage(format!("unknown config key `{path}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_partial_overlay() {
        let cfg = RunConfig::preset(Preset::Desk)
            .overlay(&json!({"seed": 9, "generation": {"rooms": 3}, "model": {"hidden_width": 64}}))
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.generation.rooms, 3);
        assert_eq!(cfg.generation.mics, 20);
        assert_eq!(cfg.model.hidden_width, 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let base = RunConfig::preset(Preset::Desk);
        assert!(base.overlay(&json!({"bogus": 1})).is_err());
        assert!(base.overlay(&json!({"generation": {"romos": 3}})).is_err());
        assert!(base.overlay(&json!({"training": {"seed": 3}})).is_err());
        assert!(base.overlay(&json!({"generation": {"rooms": "many"}})).is_err());
    }

    #[test]
    fn presets_differ() {
        let p = RunConfig::preset(Preset::Paper);
        assert_eq!(p.generation.rooms, 10_000);
        assert_eq!(p.generation.mics, 50);
        assert_eq!(p.training.batch_size, 4096);
        assert_ne!(p.hash(), RunConfig::preset(Preset::Desk).hash());
    }
}
