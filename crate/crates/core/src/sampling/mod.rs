//! Node-flow construction with category-rebalanced neighbor discovery, and
//! category-boosted negative sampling.

mod negative;
mod nodeflow;
mod rebalance;

pub use negative::{boosted_negative_sampling, NegativeSampler, TrainingSample};
pub use nodeflow::{discover_neighbors, NodeFlow};
pub use rebalance::histogram_and_rebalance;
