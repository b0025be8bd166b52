use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::translation::network::GENERATOR_STRIDE;

/// Hyperparameters of the IHC -> H&E translator.
///
/// Defaults follow the published CycleGAN recipe with batch size 10, 30 epochs
/// and 256x256 patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslationConfig {
    pub patch_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Keep the learning rate flat for the first half, then decay linearly.
    pub lr_decay: bool,
    pub cycle_weight: f64,
    pub identity_weight: f64,
    pub seed: u64,
    pub deterministic: bool,
    /// Replay buffer of past fakes for discriminator updates.
    pub replay_buffer: bool,
    pub pool_size: usize,
    /// Save an intermediate checkpoint every this many epochs (0 = never).
    pub checkpoint_every: usize,
    pub init_std: f64,
    pub generator_filters: usize,
    pub generator_blocks: usize,
    pub discriminator_filters: usize,
    pub discriminator_layers: usize,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        Self {
            patch_size: 256,
            batch_size: 10,
            epochs: 30,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            lr_decay: true,
            cycle_weight: 10.0,
            identity_weight: 5.0,
            seed: 0,
            deterministic: false,
            replay_buffer: true,
            pool_size: 50,
            checkpoint_every: 5,
            init_std: 0.02,
            generator_filters: 64,
            generator_blocks: 9,
            discriminator_filters: 64,
            discriminator_layers: 3,
        }
    }
}

impl TranslationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("patch_size", self.patch_size),
            ("batch_size", self.batch_size),
            ("generator_filters", self.generator_filters),
            ("discriminator_filters", self.discriminator_filters),
            ("discriminator_layers", self.discriminator_layers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("translation.{name} must be >= 1")));
            }
        }
        if self.patch_size % GENERATOR_STRIDE != 0 || self.patch_size < 2 * GENERATOR_STRIDE {
            return Err(Error::Config(format!(
                "translation.patch_size {} must be a multiple of {GENERATOR_STRIDE} and at least {}",
                self.patch_size,
                2 * GENERATOR_STRIDE
            )));
        }
        let nonneg = [
            ("cycle_weight", self.cycle_weight),
            ("identity_weight", self.identity_weight),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("translation.{name} must be >= 0")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("translation.learning_rate must be > 0".into()));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("translation.{name} must be in [0, 1)")));
            }
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::Config("translation.init_std must be > 0".into()));
        }
        Ok(())
    }

    /// Learning-rate multiplier for a zero-based epoch.
    pub fn lr_factor(&self, epoch: usize) -> f64 {
        if !self.lr_decay || self.epochs < 2 {
            return 1.0;
        }
        let decay = self.epochs / 2;
        let flat = self.epochs - decay;
        1.0 - (epoch + 1).saturating_sub(flat) as f64 / (decay + 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_recipe() {
        let c = TranslationConfig::default();
        assert_eq!((c.batch_size, c.epochs, c.patch_size), (10, 30, 256));
        assert_eq!((c.cycle_weight, c.identity_weight), (10.0, 5.0));
        assert_eq!(c.learning_rate, 2e-4);
        assert_eq!(c.pool_size, 50);
        assert_eq!((c.generator_blocks, c.discriminator_layers), (9, 3));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            TranslationConfig {
                patch_size: 30,
                ..Default::default()
            },
            TranslationConfig {
                batch_size: 0,
                ..Default::default()
            },
            TranslationConfig {
                cycle_weight: -1.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn lr_schedule_is_flat_then_linear() {
        let c = TranslationConfig::default();
        assert_eq!(c.lr_factor(0), 1.0);
        assert_eq!(c.lr_factor(14), 1.0);
        assert!((c.lr_factor(15) - 15.0 / 16.0).abs() < 1e-12);
        assert!((c.lr_factor(29) - 1.0 / 16.0).abs() < 1e-12);
        let windows: Vec<f64> = (0..30).map(|e| c.lr_factor(e)).collect();
        assert!(windows.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unknown_keys_fail_to_parse() {
        let err = toml::from_str::<TranslationConfig>("batch_size = 2\nbogus = 1\n");
        assert!(err.is_err());
        let ok: TranslationConfig = toml::from_str("batch_size = 2\n").unwrap();
        assert_eq!(ok.batch_size, 2);
        assert_eq!(ok.epochs, 30);
    }
}
