//! Frame-to-frame fine-tuning: the previous noisy frame, warped onto the
//! current one, is the training target for the current noisy frame.

use serde::{Deserialize, Serialize};

use super::{check_channels, check_truth, FineTuneConfig, FineTuneResult};
use crate::denoiser::{denoise, DenoiserParams, Optimizer};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::metrics::psnr;
use crate::video::VideoSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FlowMode {
    /// Exact displacement from the sequence's motion metadata.
    Oracle,
    /// One global integer translation found by exhaustive SAD search.
    BlockMatch { search_radius: i64 },
}

/// Integer `(dx, dy)` within `±radius` minimizing the mean absolute
/// difference between `moving.shift(dx, dy)` and `reference`. Ties keep the
/// first candidate in row-major scan order.
pub fn estimate_global_shift(reference: &Frame, moving: &Frame, radius: i64) -> Result<(i64, i64)> {
    if reference.shape() != moving.shape() {
        return Err(RfrError::shape(
            "estimate_global_shift",
            reference.shape(),
            moving.shape(),
        ));
    }
    let (h, w) = (reference.height() as i64, reference.width() as i64);
    let (c, hu, wu) = (reference.channels(), reference.height(), reference.width());
    let r = reference.data();
    let m = moving.data();
    let mut best = (f64::INFINITY, (0, 0));
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            // moving.shift(dx, dy)[y][x] = moving[y - dy][x - dx]
            let mut sad = 0.0;
            for ci in 0..c {
                for y in 0..hu {
                    let sy = (y as i64 - dy).rem_euclid(h) as usize;
                    let rrow = &r[(ci * hu + y) * wu..(ci * hu + y + 1) * wu];
                    let mrow = &m[(ci * hu + sy) * wu..(ci * hu + sy + 1) * wu];
                    for (x, rv) in rrow.iter().enumerate() {
                        let sx = (x as i64 - dx).rem_euclid(w) as usize;
                        sad += (rv - mrow[sx]).abs();
                    }
                }
            }
            if sad < best.0 {
                best = (sad, (dx, dy));
            }
        }
    }
    Ok(best.1)
}

/// Sequential frame-to-frame fine-tuning. Frame 1 is restored with `theta`
/// unchanged; every later frame gets `updates_per_frame` Adam steps on
/// `L(f_θ(Y_t), warp(Y_{t-1}))` before it is restored.
///
/// A search radius smaller than the true motion is not an error: the target
/// is then misaligned.
pub fn finetune_f2f(
    theta: &DenoiserParams,
    noisy: &VideoSequence,
    flow: FlowMode,
    config: &FineTuneConfig,
    clean: Option<&[Frame]>,
) -> Result<FineTuneResult> {
    config.validate()?;
    check_channels(theta, &noisy.frames)?;
    check_truth(noisy, clean)?;
    if noisy.len() < 2 {
        return Err(RfrError::InvalidArgument(
            "frame-to-frame needs at least 2 frames".into(),
        ));
    }
    if flow == FlowMode::Oracle && noisy.motion.is_none() {
        return Err(RfrError::InvalidArgument("oracle flow needs motion metadata".into()));
    }

    let mut params = theta.clone();
    let mut opt = Optimizer::new(&params);
    let mut restored = vec![denoise(&params, &noisy.frames[0])?];
    let mut loss_trace = Vec::new();
    for t in 1..noisy.len() {
        let y = &noisy.frames[t];
        let prev = &noisy.frames[t - 1];
        let (dx, dy) = match flow {
            FlowMode::Oracle => noisy.step_motion(t).expect("checked above"),
            FlowMode::BlockMatch { search_radius } => estimate_global_shift(y, prev, search_radius)?,
        };
        let target = prev.shift(dx, dy);
        for u in 0..config.updates_per_frame {
            let (out, cache) = params.forward_cached(y.tensor())?;
            let (value, g) = config.loss.value_and_grad(&out, target.tensor())?;
            if !value.is_finite() {
                return Err(RfrError::NonFiniteLoss {
                    stage: "f2f".into(),
                    iteration: u,
                    frame: t + 1,
                });
            }
            let grads = params.backward(&cache, &g)?;
            opt.step(&mut params, &grads, config.lr)?;
            loss_trace.push(value);
        }
        restored.push(denoise(&params, y)?);
    }

    let per_iteration_psnr = match clean {
        Some(c) => Some(
            restored
                .iter()
                .zip(c)
                .map(|(r, c)| psnr(&r.clamp01(), c))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(FineTuneResult {
        denoised: noisy.with_frames(restored)?,
        params,
        per_iteration_psnr,
        loss_trace,
    })
}
