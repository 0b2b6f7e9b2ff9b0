//! Sequence labeling for health-domain named-entity recognition.
//!
//! The crate is `no_std` (it needs `alloc`) and carries the numerical core:
//!
//! - [`corpus`]: BIO tag schemes, tag repair, span extraction, data splits.
//! - [`embeddings`]: vocabularies, embedding assembly and coverage, hand-crafted
//!   feature encodings, pseudo-sentence corpora and GloVe training.
//! - [`crf`]: the linear-chain CRF (scoring, log-partition, gradients, Viterbi).
//! - [`network`]: the coupled-gate peephole LSTM, bidirectional encoders,
//!   character-level embeddings and the BiLSTM / BiLSTM-CRF losses.
//! - [`training`]: the SGD loop with validation-based epoch selection.
//! - [`eval`]: strict entity-level precision, recall and F1.
//! - [`synth`]: deterministic synthetic corpora.
//!
//! File formats, checkpoint persistence and the command-line tool live in the
//! `seqtag` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod crf;
pub mod embeddings;
mod error;
pub mod eval;
pub mod math;
pub mod network;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
