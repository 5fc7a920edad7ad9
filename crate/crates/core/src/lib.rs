//! Diversified graph-convolutional matching.
//!
//! The pipeline: [`data`] turns interaction logs into a chronological split and a
//! bipartite training graph; [`sampling`] builds category-rebalanced node flows and
//! category-boosted negatives; [`model`] runs the GCN forward/backward pass with an
//! adversarial category classifier behind a gradient reversal; [`optim`] trains with
//! AMSGrad and early stopping; [`eval`] retrieves top-K items by inner product and
//! scores accuracy and diversity; [`rerank`] holds the MMR and DUM post-processing
//! baselines.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod optim;
pub mod rerank;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
