//! The link-prediction network: sequence/text encoder, heterogeneous
//! graph transformer layers and a two-layer pair predictor.

mod checkpoint;
mod config;
mod encoder;
mod network;

pub use checkpoint::{Checkpoint, CheckpointHeader, ParamMeta, CHECKPOINT_VERSION};
pub use config::{ModelConfig, MAX_LAYERS, TUNED_DIMS, TUNED_HEADS};
pub use encoder::{embed_sequence_1mer, mirna_input_row, EncoderInputs, PLACEHOLDER};
pub use network::{AttentionCache, Embedding, ForwardVars, InputShapes, Model, ModelInput};
