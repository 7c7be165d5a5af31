//! Additive white Gaussian noise and the Monte-Carlo check of how averaging
//! `T` independent noisy realizations shrinks the residual noise.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::rng::{self, domain, BoxMuller};
use crate::video::VideoSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
}

/// Noise description; `sigma255` is the standard deviation on the 0–255
/// intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    pub sigma255: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma255: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            sigma255,
            seed,
        }
    }

    /// Standard deviation on the `[0, 1]` frame scale.
    pub fn sigma(&self) -> f64 {
        self.sigma255 / 255.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma255 >= 0.0) || !self.sigma255.is_finite() {
            return Err(RfrError::InvalidArgument(format!(
                "sigma255 must be finite and >= 0, got {}",
                self.sigma255
            )));
        }
        Ok(())
    }

    pub fn with_sigma255(self, sigma255: f64) -> Self {
        NoiseSpec { sigma255, ..self }
    }

    /// Fills `out` with `sigma * z`, `z ~ N(0, 1)` drawn from the stream
    /// addressed by `draw_index`.
    pub fn fill(&self, draw_index: u64, out: &mut [f64]) {
        let sigma = self.sigma();
        let mut bm = BoxMuller::new(rng::stream(self.seed, rng::stream_id(&[domain::NOISE, draw_index])));
        for v in out.iter_mut() {
            *v = sigma * bm.sample();
        }
    }

    pub fn field(&self, draw_index: u64, channels: usize, height: usize, width: usize) -> Frame {
        let mut f = Frame::zeros(channels, height, width);
        self.fill(draw_index, f.data_mut());
        f
    }
}

/// `frame + n`, deterministic in `(spec.seed, draw_index)`. The result is not
/// clamped, so the added noise stays zero-mean.
pub fn add_noise(frame: &Frame, spec: &NoiseSpec, draw_index: u64) -> Frame {
    if spec.sigma255 == 0.0 {
        return frame.clone();
    }
    let mut out = frame.clone();
    let n = spec.field(draw_index, frame.channels(), frame.height(), frame.width());
    for (o, v) in out.data_mut().iter_mut().zip(n.data()) {
        *o += v;
    }
    out
}

/// Corrupts every frame of `clean`; frame `t` (0-based) uses draw
/// `[VIDEO, t]`, a key no fine-tuning draw produces.
pub fn corrupt_sequence(clean: &VideoSequence, spec: &NoiseSpec) -> Result<VideoSequence> {
    spec.validate()?;
    let frames = clean
        .frames
        .iter()
        .enumerate()
        .map(|(t, f)| add_noise(f, spec, draw_index(&[domain::VIDEO, t as u64])))
        .collect();
    clean.with_frames(frames)
}

/// Draw index for fine-tuning noise, keyed by its logical coordinates.
pub fn draw_index(parts: &[u64]) -> u64 {
    rng::stream_id(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub n_frames: usize,
    pub input_sigma: f64,
    /// Residual noise std of pseudo-clean frames, when that model was used.
    pub residual_sigma: Option<f64>,
    /// Empirical std of the mean of the `n_frames` realizations.
    pub averaged_sigma: f64,
    /// The std being averaged: `residual_sigma` if set, else `input_sigma`.
    pub effective_sigma: f64,
}

impl VarianceReport {
    pub fn predicted_sigma(&self) -> f64 {
        self.effective_sigma / (self.n_frames as f64).sqrt()
    }

    pub fn relative_error(&self) -> f64 {
        (self.averaged_sigma - self.predicted_sigma()).abs() / self.predicted_sigma()
    }
}

/// Draws `t` independent noisy versions of `clean` and measures the std of
/// their pixelwise average around `clean`.
///
/// With `residual_sigma = None` the realizations carry the input noise of
/// `spec` (frame-to-frame setting). With `Some(s)` they model pseudo-clean
/// frames whose remaining noise has std `s` on the `[0, 1]` scale.
pub fn variance_reduction_oracle(
    clean: &Frame,
    spec: &NoiseSpec,
    t: usize,
    residual_sigma: Option<f64>,
) -> Result<VarianceReport> {
    if t == 0 {
        return Err(RfrError::InvalidArgument("T must be >= 1".into()));
    }
    spec.validate()?;
    let effective = residual_sigma.unwrap_or(spec.sigma());
    let draw_spec = NoiseSpec::gaussian(effective * 255.0, spec.seed);
    let mut acc = vec![0.0; clean.data().len()];
    let mut buf = vec![0.0; acc.len()];
    for k in 0..t {
        draw_spec.fill(rng::stream_id(&[0x5641_52, k as u64]), &mut buf);
        for ((a, c), n) in acc.iter_mut().zip(clean.data()).zip(&buf) {
            *a += c + n;
        }
    }
    let inv_t = 1.0 / t as f64;
    let n = acc.len() as f64;
    let sq: f64 = acc
        .iter()
        .zip(clean.data())
        .map(|(a, c)| {
            let d = a * inv_t - c;
            d * d
        })
        .sum();
    Ok(VarianceReport {
        n_frames: t,
        input_sigma: spec.sigma(),
        residual_sigma,
        averaged_sigma: (sq / n).sqrt(),
        effective_sigma: effective,
    })
}
