use super::{check_channels, check_truth, pseudo_pair_loss, FineTuneConfig, FineTuneResult};
use crate::denoiser::{denoise, DenoiserParams, Optimizer};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::metrics::psnr;
use crate::noise::{self, NoiseSpec};
use crate::video::VideoSequence;

const STREAM_TAG: u64 = 2;

/// Parameters together with the Adam moments that carry over between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineModel {
    pub params: DenoiserParams,
    pub optimizer: Optimizer,
}

impl OnlineModel {
    pub fn new(params: DenoiserParams) -> Self {
        let optimizer = Optimizer::new(&params);
        OnlineModel { params, optimizer }
    }
}

/// One online time step at (0-based) frame index `t`: a step on the pseudo
/// pair of the previous restoration, then restoration of `y_t` with the
/// updated parameters. Returns the restored frame, the updated model and the
/// loss value(s) of the step(s).
pub fn finetune_online(
    model: &OnlineModel,
    xtilde_prev: &Frame,
    y_t: &Frame,
    t: usize,
    config: &FineTuneConfig,
    test_noise: &NoiseSpec,
) -> Result<(Frame, OnlineModel, Vec<f64>)> {
    if xtilde_prev.shape() != y_t.shape() {
        return Err(crate::error::RfrError::shape(
            "finetune_online",
            xtilde_prev.shape(),
            y_t.shape(),
        ));
    }
    let pseudo = config.pseudo_noise(test_noise);
    let mut next = model.clone();
    let mut losses = Vec::with_capacity(config.updates_per_frame);
    for u in 0..config.updates_per_frame {
        let draw = noise::draw_index(&[STREAM_TAG, t as u64, u as u64]);
        let field = pseudo.field(draw, y_t.channels(), y_t.height(), y_t.width());
        let (value, grads) = pseudo_pair_loss(&next.params, xtilde_prev, &field, config.loss)?;
        if !value.is_finite() {
            return Err(RfrError::NonFiniteLoss {
                stage: "online".into(),
                iteration: u,
                frame: t + 1,
            });
        }
        next.optimizer.step(&mut next.params, &grads, config.lr)?;
        losses.push(value);
    }
    let restored = denoise(&next.params, y_t)?;
    Ok((restored, next, losses))
}

/// Runs the online method over a whole sequence. The first frame is restored
/// with `theta0` and no update; parameters and optimizer state then carry
/// across the sequence.
pub fn run_online(
    theta0: &DenoiserParams,
    noisy: &VideoSequence,
    config: &FineTuneConfig,
    test_noise: &NoiseSpec,
    clean: Option<&[Frame]>,
) -> Result<FineTuneResult> {
    config.validate()?;
    check_channels(theta0, &noisy.frames)?;
    check_truth(noisy, clean)?;
    let mut model = OnlineModel::new(theta0.clone());
    let mut restored = Vec::with_capacity(noisy.len());
    let mut loss_trace = Vec::new();
    for (t, y) in noisy.frames.iter().enumerate() {
        let x = if t == 0 {
            denoise(&model.params, y)?
        } else {
            let (x, next, losses) = finetune_online(&model, &restored[t - 1], y, t, config, test_noise)?;
            model = next;
            loss_trace.extend(losses);
            x
        };
        restored.push(x);
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
        params: model.params,
        per_iteration_psnr,
        loss_trace,
    })
}
