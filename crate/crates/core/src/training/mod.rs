//! Adam, the learning-rate schedule, the epoch loop and per-horizon evaluation.

pub mod adam;
pub mod eval;
pub mod schedule;
pub mod train;

pub use adam::{adam_step, OptimState};
pub use eval::{evaluate, EvalReport, Predictor, Trained, ZeroVelocity, DEFAULT_HORIZONS};
pub use schedule::{lr_at_epoch, LrSchedule};
pub use train::{checkpoint_path, mean_loss, sample_gradient, train, LossRecord, TrainConfig, TrainHistory};
