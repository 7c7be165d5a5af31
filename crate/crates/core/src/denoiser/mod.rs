//! The single-frame fully convolutional denoiser `f_θ`.

pub mod checkpoint;
pub mod network;
pub mod pretrain;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use network::{denoise, Architecture, DenoiserParams, ForwardCache, Optimizer, ParamGrads};
pub use pretrain::{pretrain, pretrain_from, PretrainConfig, PretrainOutcome};
