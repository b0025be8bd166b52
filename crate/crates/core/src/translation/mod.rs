//! Unpaired IHC -> H&E translation with two generators and two
//! discriminators, trained with least-squares adversarial, cycle-consistency
//! and identity losses.

mod checkpoint;
mod config;
mod infer;
mod loss;
pub mod network;
mod optim;
pub mod tensor;
mod trainer;

pub use checkpoint::{parameter_payload, TranslationCheckpoint};
pub use config::TranslationConfig;
pub use infer::{check_translatable, raster_to_tensor, tensor_to_raster, translate, MIN_SIDE};
pub use loss::{adversarial_loss, cycle_loss};
pub use network::{Network, NetworkBuilder, Padding, GENERATOR_STRIDE};
pub use optim::Adam;
pub use tensor::{Scalar, Tensor};
pub use trainer::{
    generator_loss, generator_pass, train, EpochLoss, EpochSummary, GeneratorPass, LossReport,
    LossWeights, Models, Trainer,
};
