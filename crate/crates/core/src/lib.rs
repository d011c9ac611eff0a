//! Unsupervised out-of-distribution estimation for text corpora.
//!
//! The crate loads task-typed corpora, embeds them with a static word-vector
//! table, scores train/test corpus pairs with four similarity metrics (cosine,
//! MAUVE, Wasserstein-1 and Jensen-Shannon distance), and correlates those
//! scores with externally measured model performance.

pub mod correlation;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
