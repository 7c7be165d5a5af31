//! Supervised pretraining on clean texture patches with fresh AWGN per patch
//! per step, producing the baseline parameters θ₀.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{denoise, Architecture, DenoiserParams, Optimizer, ParamGrads};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::loss::LossKind;
use crate::metrics::psnr;
use crate::noise::{add_noise, NoiseSpec};
use crate::parallel::map_ordered;
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_patches: usize,
    pub patch_size: usize,
    pub train_sigma: f64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 20,
            steps_per_epoch: 100,
            batch_patches: 8,
            patch_size: 32,
            train_sigma: 15.0,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch
    }

    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if self.steps_per_epoch == 0 || self.batch_patches == 0 || self.patch_size == 0 {
            return Err(RfrError::InvalidArgument("pretrain counts must be positive".into()));
        }
        if self.patch_size < arch.receptive_field() {
            return Err(RfrError::InvalidArgument(format!(
                "patch size {} is smaller than the receptive field {}",
                self.patch_size,
                arch.receptive_field()
            )));
        }
        if !(self.lr > 0.0) || !(self.train_sigma >= 0.0) {
            return Err(RfrError::InvalidArgument("lr must be > 0 and sigma >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: DenoiserParams,
    pub loss_trace: Vec<f64>,
    /// Mean PSNR of the noisy held-out frames against their clean versions.
    pub held_out_psnr_noisy: f64,
    /// Mean PSNR of the denoised (and clamped) held-out frames.
    pub held_out_psnr_denoised: f64,
    pub held_out_count: usize,
}

impl PretrainOutcome {
    pub fn held_out_gain(&self) -> f64 {
        self.held_out_psnr_denoised - self.held_out_psnr_noisy
    }
}

/// The last `max(1, n / 10)` frames are held out; a single-frame corpus is
/// used for both roles.
pub fn split_corpus(corpus: &[Frame]) -> (&[Frame], &[Frame]) {
    let n = corpus.len();
    if n == 1 {
        return (corpus, corpus);
    }
    let held = (n / 10).max(1);
    corpus.split_at(n - held)
}

fn crop(frame: &Frame, y0: usize, x0: usize, size: usize) -> Frame {
    let c = frame.channels();
    let mut data = Vec::with_capacity(c * size * size);
    for ci in 0..c {
        for y in 0..size {
            let row = (ci * frame.height() + y0 + y) * frame.width() + x0;
            data.extend_from_slice(&frame.data()[row..row + size]);
        }
    }
    Frame::from_vec(c, size, size, data).expect("crop inside frame")
}

pub fn pretrain(arch: Architecture, config: &PretrainConfig, corpus: &[Frame]) -> Result<PretrainOutcome> {
    pretrain_from(DenoiserParams::init(arch, config.seed)?, config, corpus)
}

/// Trains from the given initialization. `epochs = 0` returns it unchanged.
pub fn pretrain_from(init: DenoiserParams, config: &PretrainConfig, corpus: &[Frame]) -> Result<PretrainOutcome> {
    config.validate(&init.arch)?;
    if corpus.is_empty() {
        return Err(RfrError::InvalidArgument("pretraining corpus is empty".into()));
    }
    if let Some(f) = corpus
        .iter()
        .find(|f| f.height() <= config.patch_size || f.width() <= config.patch_size)
    {
        return Err(RfrError::InvalidArgument(format!(
            "corpus frame {}x{} is not larger than patch size {}",
            f.height(),
            f.width(),
            config.patch_size
        )));
    }
    if let Some(f) = corpus.iter().find(|f| f.channels() != init.arch.image_channels) {
        return Err(RfrError::shape(
            "pretrain corpus",
            &[init.arch.image_channels],
            &[f.channels()],
        ));
    }

    let (train, held_out) = split_corpus(corpus);
    let noise = NoiseSpec::gaussian(config.train_sigma, config.seed);
    let loss = LossKind::L2;
    let mut params = init;
    let mut opt = Optimizer::new(&params);
    let mut loss_trace = Vec::with_capacity(config.total_steps());
    let ps = config.patch_size;

    for step in 0..config.total_steps() {
        let mut pick = rng::stream(config.seed, rng::stream_id(&[domain::PATCHES, step as u64]));
        let batch: Vec<(Frame, u64)> = (0..config.batch_patches)
            .map(|b| {
                let f = &train[pick.gen_range(0..train.len())];
                let y0 = pick.gen_range(0..=f.height() - ps);
                let x0 = pick.gen_range(0..=f.width() - ps);
                (crop(f, y0, x0, ps), rng::stream_id(&[step as u64, b as u64]))
            })
            .collect();

        let parts = map_ordered(&batch, |_, (clean, draw)| -> Result<(f64, ParamGrads)> {
            let noisy = add_noise(clean, &noise, *draw);
            let (out, cache) = params.forward_cached(noisy.tensor())?;
            let (l, g) = loss.value_and_grad(&out, clean.tensor())?;
            Ok((l, params.backward(&cache, &g)?))
        });
        let mut total = ParamGrads::zeros_like(&params);
        let mut step_loss = 0.0;
        for part in parts {
            let (l, g) = part?;
            step_loss += l;
            total.add_assign(&g)?;
        }
        let inv = 1.0 / config.batch_patches as f64;
        step_loss *= inv;
        total.scale(inv);
        if !step_loss.is_finite() || !total.is_finite() {
            return Err(RfrError::Diverged { step, loss: step_loss });
        }
        opt.step(&mut params, &total, config.lr)?;
        loss_trace.push(step_loss);
    }

    let (noisy_psnr, denoised_psnr) = evaluate_held_out(&params, held_out, &noise)?;
    Ok(PretrainOutcome {
        params,
        loss_trace,
        held_out_psnr_noisy: noisy_psnr,
        held_out_psnr_denoised: denoised_psnr,
        held_out_count: held_out.len(),
    })
}

/// Mean `(noisy, denoised)` PSNR over `frames` corrupted with `noise`.
pub fn evaluate_held_out(params: &DenoiserParams, frames: &[Frame], noise: &NoiseSpec) -> Result<(f64, f64)> {
    let mut noisy_sum = 0.0;
    let mut den_sum = 0.0;
    for (i, clean) in frames.iter().enumerate() {
        let noisy = add_noise(clean, noise, rng::stream_id(&[0x4845_4c44, i as u64]));
        let den = denoise(params, &noisy)?.clamp01();
        noisy_sum += psnr(&noisy.clamp01(), clean)?;
        den_sum += psnr(&den, clean)?;
    }
    let n = frames.len() as f64;
    Ok((noisy_sum / n, den_sum / n))
}
