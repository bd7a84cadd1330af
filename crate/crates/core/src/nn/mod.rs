//! Minimal neural stack for critics: MLP with reverse-mode gradients, Adam,
//! Polyak-averaged target copies and a checkpoint format.

mod activation;
mod adam;
pub mod checkpoint;
mod mlp;
mod qnet;
mod target;

pub use activation::{mish, Activation};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use mlp::{Dense, ForwardCache, Mlp, ParamSet};
pub use qnet::{NoiseLevel, QNetwork, QNetworkSpec};
pub use target::{polyak_update, TargetCopy};
