//! Test-time fine-tuning without clean frames.
//!
//! * [`offline`]: every iteration re-restores the whole video with the current
//!   parameters and takes one Adam step on pseudo pairs built from those
//!   restorations (plus, optionally, pairs built from the initial
//!   restorations).
//! * [`online`]: one step per incoming frame on the previous frame's pseudo
//!   pair, then restore the current frame.
//! * [`f2f`]: the frame-to-frame baseline that trains on pairs of aligned
//!   noisy frames.
//!
//! A pseudo pair for target `x` is `(x + n, x)` with `n` freshly drawn noise;
//! its loss is `L(f_θ(x + n), x)`.

pub mod equivariance;
pub mod f2f;
pub mod offline;
pub mod online;

use serde::{Deserialize, Serialize};

use crate::denoiser::{denoise, DenoiserParams, ParamGrads};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::loss::LossKind;
use crate::metrics::psnr;
use crate::noise::NoiseSpec;
use crate::parallel::map_ordered;
use crate::video::VideoSequence;

pub use equivariance::equivariance_report;
pub use f2f::{estimate_global_shift, finetune_f2f, FlowMode};
pub use offline::finetune_offline;
pub use online::{finetune_online, run_online, OnlineModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    /// Number of offline gradient steps `K`.
    pub iterations: usize,
    pub lr: f64,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default = "yes")]
    pub use_second_term: bool,
    /// Noise level of the synthetic pseudo-noisy inputs; `None` means "same as
    /// the test noise".
    #[serde(default)]
    pub finetune_sigma255: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Gradient steps per frame for the sequential methods (online, f2f).
    #[serde(default = "one")]
    pub updates_per_frame: usize,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            iterations: 10,
            lr: 1e-5,
            loss: LossKind::L2,
            use_second_term: true,
            finetune_sigma255: None,
            seed: 0,
            updates_per_frame: 1,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(RfrError::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if let Some(s) = self.finetune_sigma255 {
            if !(s >= 0.0) {
                return Err(RfrError::InvalidArgument(format!(
                    "finetune sigma must be >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Noise used to synthesize pseudo-noisy frames, given the test noise.
    pub fn pseudo_noise(&self, test_noise: &NoiseSpec) -> NoiseSpec {
        NoiseSpec::gaussian(self.finetune_sigma255.unwrap_or(test_noise.sigma255), self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct FineTuneResult {
    pub denoised: VideoSequence,
    pub params: DenoiserParams,
    /// Mean PSNR after each update (offline: of `X̃^0..X̃^K`; sequential
    /// methods: of each emitted frame). Only present with ground truth.
    pub per_iteration_psnr: Option<Vec<f64>>,
    pub loss_trace: Vec<f64>,
}

/// Loss of one pseudo pair with an explicit noise field, and its parameter
/// gradient.
pub fn pseudo_pair_loss(
    params: &DenoiserParams,
    target: &Frame,
    noise_field: &Frame,
    loss: LossKind,
) -> Result<(f64, ParamGrads)> {
    let input = target.tensor().add(noise_field.tensor())?;
    let (out, cache) = params.forward_cached(&input)?;
    let (value, g) = loss.value_and_grad(&out, target.tensor())?;
    Ok((value, params.backward(&cache, &g)?))
}

/// Loss value only; same conventions as [`pseudo_pair_loss`].
pub fn pseudo_pair_loss_value(
    params: &DenoiserParams,
    target: &Frame,
    noise_field: &Frame,
    loss: LossKind,
) -> Result<f64> {
    let input = target.tensor().add(noise_field.tensor())?;
    loss.value(&params.forward(&input)?, target.tensor())
}

/// `f_θ(Y_t)` for every frame, in order.
pub fn restore_all(params: &DenoiserParams, frames: &[Frame]) -> Result<Vec<Frame>> {
    map_ordered(frames, |_, f| denoise(params, f)).into_iter().collect()
}

pub(crate) fn check_channels(params: &DenoiserParams, frames: &[Frame]) -> Result<()> {
    if let Some(f) = frames.iter().find(|f| f.channels() != params.arch.image_channels) {
        return Err(RfrError::shape(
            "fine-tune input channels",
            &[params.arch.image_channels, f.height(), f.width()],
            f.shape(),
        ));
    }
    Ok(())
}

pub(crate) fn check_truth(noisy: &VideoSequence, clean: Option<&[Frame]>) -> Result<()> {
    if let Some(c) = clean {
        if c.len() != noisy.len() {
            return Err(RfrError::shape("ground truth length", &[noisy.len()], &[c.len()]));
        }
    }
    Ok(())
}

pub(crate) fn mean_psnr(restored: &[Frame], clean: &[Frame]) -> Result<f64> {
    let mut s = 0.0;
    for (r, c) in restored.iter().zip(clean) {
        s += psnr(&r.clamp01(), c)?;
    }
    Ok(s / restored.len().max(1) as f64)
}

/// The untouched pretrained network applied frame by frame.
pub fn baseline(theta0: &DenoiserParams, noisy: &VideoSequence, clean: Option<&[Frame]>) -> Result<FineTuneResult> {
    check_channels(theta0, &noisy.frames)?;
    check_truth(noisy, clean)?;
    let restored = restore_all(theta0, &noisy.frames)?;
    let per_iteration_psnr = match clean {
        Some(c) => Some(vec![mean_psnr(&restored, c)?]),
        None => None,
    };
    Ok(FineTuneResult {
        denoised: noisy.with_frames(restored)?,
        params: theta0.clone(),
        per_iteration_psnr,
        loss_trace: Vec::new(),
    })
}
