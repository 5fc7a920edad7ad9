//! AMSGrad and the training loop.

mod amsgrad;
mod train;

pub use amsgrad::{amsgrad_update, AmsGrad, AmsGradConfig, Moments};
pub use train::{
    fit, read_train_log, save_run, validation_metrics, write_train_log, CheckpointMeta, EpochLog, TrainConfig,
    TrainOutcome, CHECKPOINT_FILE, CHECKPOINT_META_FILE, TRAIN_LOG_FILE,
};
