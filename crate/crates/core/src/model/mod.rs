//! The GCN matching model with an adversarial category classifier.

mod backward;
pub mod checkpoint;
mod forward;
mod loss;
mod params;

pub use backward::{backward, head_gradients, propagate, Gradients, HeadGradients, LossReport, SparseRows};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use forward::{forward, forward_with_masks, ForwardTrace, LayerTrace, Mode};
pub(crate) use forward::{convolve, mean_aggregate};
pub use loss::{cls_loss, grl_backward, rec_loss, score, sigmoid};
pub use params::ModelParameters;
