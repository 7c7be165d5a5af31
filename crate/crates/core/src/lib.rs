//! Test-time self-supervised video denoising by restore-from-restored
//! fine-tuning of a small fully convolutional denoiser.

pub mod adam;
pub mod conv;
pub mod denoiser;
pub mod error;
pub mod experiment;
pub mod finetune;
pub mod frame;
pub mod loss;
pub mod methods;
pub mod metrics;
pub mod noise;
pub mod parallel;
pub mod rng;
pub mod tensor;
pub mod video;

pub use error::{Result, RfrError};
pub use frame::Frame;
