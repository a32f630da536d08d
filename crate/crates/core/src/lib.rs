//! Recommending trace-clustering pipelines for process-mining event logs.
//!
//! The crate covers the full meta-learning loop:
//!
//! 1. [`log`]: event-log ingestion (XES, CSV) and a synthetic log generator.
//! 2. [`features`]: a fixed-order vector of log meta-features.
//! 3. [`encoding`]: one-hot, n-gram and position-profile trace encoders.
//! 4. [`clustering`]: dbscan, k-means and Ward agglomerative clustering.
//! 5. [`ranking`]: silhouette, variant score, timing, and rank aggregation.
//! 6. [`metadb`]: grid evaluation per log and meta-database assembly.
//! 7. [`learner`]: binary-relevance random forests, tuning, evaluation and
//!    permutation importance.

pub mod clustering;
pub mod encoding;
pub mod error;
pub mod features;
pub mod learner;
pub mod log;
pub mod metadb;
pub mod ranking;
mod seed;

pub use error::{Error, Result};
pub use seed::derive_seed;
