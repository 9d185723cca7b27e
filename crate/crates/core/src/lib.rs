//! Incomplete utterance rewriting with a down-sampled MLP edit model.
//!
//! The pipeline has four parts:
//!
//! - [`text`]: tokenization, vocabularies, dialogue joining, JSONL corpora.
//! - [`edit`]: LCS-derived edit matrices and edit program application.
//! - [`tensor`] and [`model`]: a small reverse-mode tensor core and the
//!   local/global mixing network that labels every (context, incomplete)
//!   token pair as `Substitute`, `Insert` or `None`.
//! - [`train`]: training loop, metrics, checkpoints and latency benchmarks.
//!
//! [`cli`] wires these into the `rsmlp` command.

pub mod cli;
pub mod edit;
pub mod model;
pub mod tensor;
pub mod text;
pub mod train;
