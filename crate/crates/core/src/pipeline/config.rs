use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::EvalOptions;
use crate::positivity::PositivityThresholds;
use crate::segmentation::{ClassicalParams, ExchangeContract, SegmenterDescriptor};
use crate::translation::{TranslationConfig, GENERATOR_STRIDE};

/// Every tunable of every stage. Loaded from TOML; unknown keys are errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub prepare: PrepareConfig,
    pub translation: TranslationConfig,
    pub translate: TranslateConfig,
    pub segmentation: SegmentationConfig,
    pub evaluation: EvalOptions,
    pub positivity: PositivityThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub patch_size: usize,
    pub count_per_image: usize,
    pub seed: u64,
    /// Reject patches whose mean HSI saturation is below this value.
    pub min_saturation: Option<f64>,
    /// Use every source image as is instead of sampling patches.
    pub whole_image: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            count_per_image: 16,
            seed: 0,
            min_saturation: None,
            whole_image: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateConfig {
    pub tile_size: usize,
    pub overlap: usize,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        Self {
            tile_size: 256,
            overlap: 32,
        }
    }
}

/// An external segmenter reached through file exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBackend {
    pub command: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Version of the wrapper script, recorded in run records.
    #[serde(default)]
    pub version: String,
}

fn default_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub backend: String,
    pub classical: ClassicalParams,
    pub backends: BTreeMap<String, ExternalBackend>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            backend: "classical".into(),
            classical: ClassicalParams::default(),
            backends: BTreeMap::new(),
        }
    }
}

impl SegmentationConfig {
    /// Names of every usable backend, built-in first.
    pub fn registered(&self) -> Vec<String> {
        std::iter::once("classical".to_string())
            .chain(self.backends.keys().filter(|k| *k != "classical").cloned())
            .collect()
    }

    pub fn resolve(&self, name: &str) -> Result<SegmenterDescriptor> {
        if name == "classical" {
            return Ok(SegmenterDescriptor::classical(self.classical.clone()));
        }
        match self.backends.get(name) {
            Some(b) => Ok(SegmenterDescriptor::exchange(
                name,
                b.version.clone(),
                ExchangeContract::new(b.command.clone(), b.timeout_secs),
            )),
            None => Err(Error::Config(format!(
                "unknown segmentation backend `{name}`; registered: {}",
                self.registered().join(", ")
            ))),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    /// Checks every section; called before any work starts.
    pub fn validate(&self) -> Result<()> {
        let p = &self.prepare;
        if p.patch_size == 0 || p.count_per_image == 0 {
            return Err(Error::Config("prepare.patch_size and prepare.count_per_image must be >= 1".into()));
        }
        if let Some(s) = p.min_saturation {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("prepare.min_saturation must lie in [0, 1], got {s}")));
            }
        }
        self.translation.validate()?;
        let t = &self.translate;
        if t.tile_size < 2 * GENERATOR_STRIDE || t.tile_size % GENERATOR_STRIDE != 0 {
            return Err(Error::Config(format!(
                "translate.tile_size must be a multiple of {GENERATOR_STRIDE} and at least {}, got {}",
                2 * GENERATOR_STRIDE,
                t.tile_size
            )));
        }
        if t.overlap >= t.tile_size {
            return Err(Error::Config("translate.overlap must be smaller than tile_size".into()));
        }
        self.segmentation.classical.validate()?;
        self.segmentation.resolve(&self.segmentation.backend)?;
        self.evaluation.validate()?;
        self.positivity.validate()?;
        Ok(())
    }

    /// Short content hash of the resolved configuration.
    pub fn short_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config is always serializable");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.translation.batch_size, 10);
        assert_eq!(c.translation.epochs, 30);
        assert_eq!(c.evaluation.curve_step, 0.05);
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_toml("[translation]\nepochz = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(PipelineConfig::from_toml("[nope]\n").is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = PipelineConfig::from_toml("[translation]\nepochs = 2\n[positivity]\nmin_fraction = 0.5\n").unwrap();
        assert_eq!(c.translation.epochs, 2);
        assert_eq!(c.translation.batch_size, 10);
        assert_eq!(c.positivity.min_fraction, 0.5);
    }

    #[test]
    fn backend_registry() {
        let c = PipelineConfig::from_toml(
            "[segmentation.backends.cellpose]\ncommand = \"{backend_dir}/cellpose.sh {input} {output}\"\nversion = \"2\"\n",
        )
        .unwrap();
        assert_eq!(c.segmentation.registered(), vec!["classical", "cellpose"]);
        assert_eq!(c.segmentation.resolve("cellpose").unwrap().version, "2");
        match c.segmentation.resolve("hovernet") {
            Err(Error::Config(msg)) => assert!(msg.contains("classical, cellpose")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut c = PipelineConfig::default();
        c.translate.tile_size = 30;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = PipelineConfig::default();
        c.segmentation.backend = "missing".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.translation.seed = 1;
        assert_eq!(a.short_hash().len(), 8);
        assert_ne!(a.short_hash(), b.short_hash());
    }
}
