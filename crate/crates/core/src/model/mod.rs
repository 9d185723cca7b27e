//! The sampled-MLP edit model.
//!
//! Data flow for one dialogue of joint length `L`:
//!
//! ```text
//! encode        [L_pad, D]   embeddings, last row replicated up to a block multiple
//! local_unit    [L_pad, S]   per-block token mixing (B -> H_local -> B), then D -> S
//! global_unit   [L_pad, D]   token mixing over L_max rows (L_max -> H_global -> L_max), then S -> D
//! similarity    [M*(N+1), 3] dot, cosine and bilinear score per (context, incomplete) pair
//! classify      [M*(N+1), 3] batchnorm, then a 3 -> 3 linear map to None/Substitute/Insert
//! ```

mod config;
mod embeddings;
mod gradcheck;
mod network;

pub use config::{EncoderKind, ModelConfig};
pub use embeddings::{EmbeddingRecord, PrecomputedEmbeddings};
pub use gradcheck::{batch_loss, gradient_check, GradCheck, LossBatch, REL_ERROR_FLOOR};
pub use network::{ModelInput, Prediction, Rsmlp, StepOutput};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("joint sequence of {len} tokens exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("invalid model input: {0}")]
    BadInput(String),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("precomputed embeddings: {0}")]
    Embeddings(String),
}
