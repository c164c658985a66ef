//! Effective-token pipeline for video anomaly understanding over precomputed embeddings.
//!
//! - [`store`]: VAEB embedding files, label manifests, synthetic data.
//! - [`sets`]: inter-frame difference maps, top-K token selection, content/context tokens.
//! - [`tetg`]: anomaly-aware frame classifier, per-frame scores, interval extraction, prompt rendering.
//! - [`eval`]: frame AUC, temporal IoU, token budgets and the K-ratio ablation.
//! - [`cli`]: the `vadtok` command line.

pub mod cli;
pub mod error;
pub mod eval;
pub mod sets;
pub mod store;
pub mod tetg;

pub use error::{Error, Result};
