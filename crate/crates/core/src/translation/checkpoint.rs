//! Self-contained checkpoint archive.
//!
//! The file is a safetensors container: every parameter is stored under its
//! network-qualified name as little-endian `f32` with its shape, and the
//! header metadata carries the configuration, epoch index and loss history as
//! JSON text.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use crate::error::{Error, Result};
use crate::translation::config::TranslationConfig;
use crate::translation::network::Network;
use crate::translation::trainer::{EpochLoss, Models, Trainer};

const FORMAT_TAG: &str = "ihc2he-translation/1";

/// Learned parameters plus the metadata needed to rebuild and audit them.
#[derive(Debug, Clone)]
pub struct TranslationCheckpoint {
    pub config: TranslationConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub loss_history: Vec<EpochLoss>,
    pub models: Models<f32>,
}

fn ckpt_err(msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(msg.to_string())
}

impl TranslationCheckpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        Self {
            config: trainer.config.clone(),
            epoch: trainer.epoch,
            loss_history: trainer.history.clone(),
            models: trainer.models.clone(),
        }
    }

    /// Freshly initialized (untrained) networks for `config`.
    pub fn untrained(config: TranslationConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            models: Models::initialize(&config, &mut rng),
            config,
            epoch: 0,
            loss_history: Vec::new(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload: Vec<(String, Vec<usize>, Vec<u8>)> = Vec::new();
        for net in self.models.networks() {
            for p in net.params() {
                let bytes = p.data.iter().flat_map(|v| v.to_le_bytes()).collect();
                payload.push((p.name.clone(), p.shape.clone(), bytes));
            }
        }
        let views = payload
            .iter()
            .map(|(name, shape, bytes)| {
                TensorView::new(Dtype::F32, shape.clone(), bytes)
                    .map(|v| (name.clone(), v))
                    .map_err(ckpt_err)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut meta = HashMap::new();
        meta.insert("format".to_string(), FORMAT_TAG.to_string());
        meta.insert(
            "config".to_string(),
            serde_json::to_string(&self.config).map_err(ckpt_err)?,
        );
        meta.insert("epoch".to_string(), self.epoch.to_string());
        meta.insert(
            "loss_history".to_string(),
            serde_json::to_string(&self.loss_history).map_err(ckpt_err)?,
        );
        meta.insert("tool_version".to_string(), crate::VERSION.to_string());
        safetensors::serialize(views, &Some(meta)).map_err(ckpt_err)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, header) = SafeTensors::read_metadata(bytes).map_err(ckpt_err)?;
        let meta = header
            .metadata()
            .as_ref()
            .ok_or_else(|| ckpt_err("missing metadata header"))?;
        let field = |key: &str| {
            meta.get(key)
                .ok_or_else(|| ckpt_err(format!("metadata lacks `{key}`")))
        };
        if field("format")? != FORMAT_TAG {
            return Err(ckpt_err(format!("unsupported format {}", field("format")?)));
        }
        let config: TranslationConfig = serde_json::from_str(field("config")?).map_err(ckpt_err)?;
        config.validate()?;
        let epoch = field("epoch")?.parse().map_err(ckpt_err)?;
        let loss_history = serde_json::from_str(field("loss_history")?).map_err(ckpt_err)?;

        let tensors = SafeTensors::deserialize(bytes).map_err(ckpt_err)?;
        let mut models = Models::<f32>::architecture(&config);
        let expected: usize = models.networks().iter().map(|n| n.params().len()).sum();
        if tensors.len() != expected {
            return Err(ckpt_err(format!(
                "archive holds {} tensors, architecture needs {expected}",
                tensors.len()
            )));
        }
        for net in models.networks_mut() {
            load_network(net, &tensors)?;
        }
        Ok(Self {
            config,
            epoch,
            loss_history,
            models,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn load_network(net: &mut Network<f32>, tensors: &SafeTensors<'_>) -> Result<()> {
    for p in net.params_mut() {
        let view = tensors
            .tensor(&p.name)
            .map_err(|_| ckpt_err(format!("missing tensor `{}`", p.name)))?;
        if view.dtype() != Dtype::F32 || view.shape() != p.shape.as_slice() {
            return Err(ckpt_err(format!(
                "tensor `{}` is {:?} {:?}, expected F32 {:?}",
                p.name,
                view.dtype(),
                view.shape(),
                p.shape
            )));
        }
        for (dst, chunk) in p.data.iter_mut().zip(view.data().chunks_exact(4)) {
            *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    Ok(())
}

/// Parameter payload (names, shapes and raw bytes) in archive order.
pub fn parameter_payload(bytes: &[u8]) -> Result<Vec<(String, Vec<usize>, Vec<u8>)>> {
    let tensors = SafeTensors::deserialize(bytes).map_err(ckpt_err)?;
    let mut out: Vec<_> = tensors
        .tensors()
        .into_iter()
        .map(|(name, view)| (name, view.shape().to_vec(), view.data().to_vec()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TranslationConfig {
        TranslationConfig {
            patch_size: 16,
            generator_filters: 2,
            generator_blocks: 1,
            discriminator_filters: 2,
            discriminator_layers: 1,
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_byte_stable_for_parameters() {
        let ckpt = TranslationCheckpoint::untrained(small()).unwrap();
        let bytes = ckpt.to_bytes().unwrap();
        let loaded = TranslationCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(loaded.config, ckpt.config);
        for (a, b) in loaded.models.networks().iter().zip(ckpt.models.networks()) {
            assert_eq!(a.params(), b.params());
        }
        let again = loaded.to_bytes().unwrap();
        assert_eq!(parameter_payload(&bytes).unwrap(), parameter_payload(&again).unwrap());
    }

    #[test]
    fn corrupt_archive_is_a_checkpoint_error() {
        assert!(matches!(
            TranslationCheckpoint::from_bytes(b"garbage"),
            Err(Error::Checkpoint(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.safetensors");
        let mut bytes = TranslationCheckpoint::untrained(small()).unwrap().to_bytes().unwrap();
        bytes.truncate(bytes.len() / 2);
        fs::write(&path, bytes).unwrap();
        let err = TranslationCheckpoint::load(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(ref m) if m.contains("x.safetensors")));
    }
}
