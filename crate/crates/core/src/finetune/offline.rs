use super::{check_channels, check_truth, mean_psnr, pseudo_pair_loss, restore_all, FineTuneConfig, FineTuneResult};
use crate::denoiser::{DenoiserParams, Optimizer, ParamGrads};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::noise::{self, NoiseSpec};
use crate::parallel::map_ordered;
use crate::video::VideoSequence;

const STREAM_TAG: u64 = 1;

/// Draw index of the pseudo noise for `(iteration, frame, term)`.
pub fn offline_draw(iteration: usize, frame: usize, term: usize) -> u64 {
    noise::draw_index(&[STREAM_TAG, iteration as u64, frame as u64, term as u64])
}

/// Offline restore-from-restored fine-tuning.
///
/// For `i in 0..K`: restore every frame with `θ_i`, sum the pseudo-pair losses
/// of those restorations (and, with `use_second_term`, of the initial
/// restorations `X̃^0`), take one Adam step. The output is every frame
/// restored with `θ_K`. `theta0` is never modified.
pub fn finetune_offline(
    theta0: &DenoiserParams,
    noisy: &VideoSequence,
    config: &FineTuneConfig,
    test_noise: &NoiseSpec,
    clean: Option<&[Frame]>,
) -> Result<FineTuneResult> {
    config.validate()?;
    check_channels(theta0, &noisy.frames)?;
    check_truth(noisy, clean)?;
    let pseudo = config.pseudo_noise(test_noise);

    let mut params = theta0.clone();
    let mut opt = Optimizer::new(&params);
    let initial = restore_all(&params, &noisy.frames)?;
    let mut current = initial.clone();
    let mut loss_trace = Vec::with_capacity(config.iterations);
    let mut psnr_trace = Vec::new();
    if let Some(c) = clean {
        psnr_trace.push(mean_psnr(&current, c)?);
    }

    for i in 0..config.iterations {
        if i > 0 {
            current = restore_all(&params, &noisy.frames)?;
            if let Some(c) = clean {
                psnr_trace.push(mean_psnr(&current, c)?);
            }
        }
        let indices: Vec<usize> = (0..noisy.len()).collect();
        let parts = map_ordered(&indices, |_, &t| -> Result<Vec<(f64, ParamGrads)>> {
            let mut terms = Vec::with_capacity(2);
            let targets: &[&Frame] = if config.use_second_term {
                &[&current[t], &initial[t]]
            } else {
                &[&current[t]]
            };
            for (term, target) in targets.iter().enumerate() {
                let field = pseudo.field(
                    offline_draw(i, t, term),
                    target.channels(),
                    target.height(),
                    target.width(),
                );
                terms.push(pseudo_pair_loss(&params, target, &field, config.loss)?);
            }
            Ok(terms)
        });

        let mut total_loss = 0.0;
        let mut grads = ParamGrads::zeros_like(&params);
        for (t, part) in parts.into_iter().enumerate() {
            for (value, g) in part? {
                if !value.is_finite() {
                    return Err(RfrError::NonFiniteLoss {
                        stage: "offline".into(),
                        iteration: i,
                        frame: t + 1,
                    });
                }
                total_loss += value;
                grads.add_assign(&g)?;
            }
        }
        opt.step(&mut params, &grads, config.lr)?;
        loss_trace.push(total_loss);
    }

    let restored = if config.iterations == 0 {
        initial
    } else {
        restore_all(&params, &noisy.frames)?
    };
    let per_iteration_psnr = match clean {
        Some(c) => {
            if config.iterations > 0 {
                psnr_trace.push(mean_psnr(&restored, c)?);
            }
            Some(psnr_trace)
        }
        None => None,
    };
    Ok(FineTuneResult {
        denoised: noisy.with_frames(restored)?,
        params,
        per_iteration_psnr,
        loss_trace,
    })
}
