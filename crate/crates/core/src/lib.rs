//! Attractor-guided neural network for skeleton-based human motion prediction.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: dense tensors, a reverse-mode tape and finite-difference checks.
//! * [`layers`]: the multi-timescale dynamics extractor, the global coordination
//!   extractor (balance attractor + cosine correlation graphs), the local
//!   interaction extractor and the adaptive channel-attention fusion.
//! * [`model`]: the encoder–decoder assembly, MPJPE loss, parameters and checkpoints.
//! * [`training`]: Adam, the learning-rate schedule, training and per-horizon evaluation.
//! * [`data`]: motion files, window extraction, synthetic skeletons and exporters.

pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig, ParamStore};
pub use tensor::{Scalar, Tape, Tensor, Var};
