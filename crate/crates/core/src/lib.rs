//! Accent identification workbench.
//!
//! Stages: synthetic or ingested embedding corpora ([`corpus`]), speaker
//! augmentation by feature-space conversion ([`vc`]), a feed-forward accent
//! classifier with an adversarial speaker head ([`classifier`]), evaluation
//! ([`metrics`]) and config-driven experiment runs ([`experiments`]).

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod numeric;
pub mod rng;
pub mod types;
pub mod vc;

pub use error::{AidError, Result};
pub use numeric::{argmax, cosine_similarity, mean_pool, softmax};
pub use types::{EmbeddingVector, FrameSequence, LabelIndex, Provenance, Utterance};
