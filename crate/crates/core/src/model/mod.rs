//! Quad-modal fusion model: vocabulary surgery, modality encoders, placeholder
//! expansion, the causal transformer and decoding.

pub mod checkpoint;
pub mod config;
pub mod encoders;
pub mod fusion;
pub mod ops;
pub mod params;
pub mod processor;
pub mod transformer;
pub mod vocab;

pub use config::{AudioConfig, FusionConfig, TsEncoderConfig, VisionConfig};
pub use encoders::FrameStack;
pub use fusion::{resize_embeddings, sample_index, Encoded, FusionModel, ModalInputs, Prepared};
pub use params::{FusionParams, Group};
pub use processor::{assemble_context, expand_placeholders, Modality, ProcessorOutput};
pub use vocab::{extend_vocab, Vocab};

#[cfg(test)]
pub(crate) mod tests;
