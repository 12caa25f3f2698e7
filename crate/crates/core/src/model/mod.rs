//! Encoder–decoder assembly, loss and parameter persistence.

pub mod checkpoint;
mod config;
pub mod gradsuite;
mod loss;
mod network;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use loss::{mpjpe, mpjpe_loss};
pub use network::{AjreBlock, Model};
pub use params::{seeded_rng, ParamBuilder, ParamId, ParamStore, ParamVars};
pub use gradsuite::{gradient_suite, SuiteRow};
