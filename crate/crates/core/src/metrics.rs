//! PSNR and SSIM with peak value 1.0.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RfrError};
use crate::frame::Frame;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(x: &Frame, y: &Frame, op: &'static str) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(RfrError::shape(op, x.shape(), y.shape()));
    }
    Ok(())
}

/// `10 log10(1 / MSE)`. Identical frames give `f64::INFINITY`.
pub fn psnr(x: &Frame, y: &Frame) -> Result<f64> {
    check_pair(x, y, "psnr")?;
    let mse = crate::tensor::mse(x.tensor(), y.tensor())?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Renders a PSNR value for reports; infinity becomes `inf`.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

pub fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of one `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Per-channel SSIM maps over valid window positions: `(luminance, cs)`
/// factors so that `ssim = luminance * cs` pointwise.
fn ssim_maps(x: &[f64], y: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let k = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let exx = filter_valid(&xx, h, w, &k);
    let eyy = filter_valid(&yy, h, w, &k);
    let exy = filter_valid(&xy, h, w, &k);
    let mut lum = Vec::with_capacity(mx.len());
    let mut cs = Vec::with_capacity(mx.len());
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let vx = exx[i] - a * a;
        let vy = eyy[i] - b * b;
        let cov = exy[i] - a * b;
        lum.push((2.0 * a * b + c1) / (a * a + b * b + c1));
        cs.push((2.0 * cov + c2) / (vx + vy + c2));
    }
    (lum, cs)
}

fn check_ssim_input(x: &Frame, y: &Frame) -> Result<()> {
    check_pair(x, y, "ssim")?;
    if x.height() < SSIM_WINDOW || x.width() < SSIM_WINDOW {
        return Err(RfrError::InvalidArgument(format!(
            "ssim needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            x.height(),
            x.width()
        )));
    }
    Ok(())
}

/// Mean SSIM: 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, dynamic
/// range 1, averaged over valid positions and then over channels.
pub fn ssim(x: &Frame, y: &Frame) -> Result<f64> {
    check_ssim_input(x, y)?;
    Ok(channel_mean(x, y, |lum, cs| lum * cs))
}

/// Mean of the contrast-structure factor alone (the part of SSIM that does
/// not see local brightness).
pub fn ssim_contrast_structure(x: &Frame, y: &Frame) -> Result<f64> {
    check_ssim_input(x, y)?;
    Ok(channel_mean(x, y, |_, cs| cs))
}

fn channel_mean(x: &Frame, y: &Frame, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (h, w) = (x.height(), x.width());
    let plane = h * w;
    let mut total = 0.0;
    for c in 0..x.channels() {
        let (lum, cs) = ssim_maps(
            &x.data()[c * plane..(c + 1) * plane],
            &y.data()[c * plane..(c + 1) * plane],
            h,
            w,
        );
        total += lum.iter().zip(&cs).map(|(&l, &s)| f(l, s)).sum::<f64>() / lum.len() as f64;
    }
    total / x.channels() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameQuality {
    pub t: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_frame: Vec<FrameQuality>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl QualityReport {
    /// Scores each restored frame (clamped to `[0, 1]` first) against the
    /// matching clean frame. `t` is 1-based.
    pub fn evaluate(restored: &[Frame], clean: &[Frame]) -> Result<Self> {
        if restored.len() != clean.len() {
            return Err(RfrError::shape("QualityReport", &[clean.len()], &[restored.len()]));
        }
        let per_frame = restored
            .iter()
            .zip(clean)
            .enumerate()
            .map(|(i, (r, c))| {
                let r = r.clamp01();
                Ok(FrameQuality {
                    t: i + 1,
                    psnr: psnr(&r, c)?,
                    ssim: ssim(&r, c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_frames(per_frame))
    }

    pub fn from_frames(per_frame: Vec<FrameQuality>) -> Self {
        let n = per_frame.len().max(1) as f64;
        let mean_psnr = per_frame.iter().map(|q| q.psnr).sum::<f64>() / n;
        let mean_ssim = per_frame.iter().map(|q| q.ssim).sum::<f64>() / n;
        QualityReport {
            per_frame,
            mean_psnr,
            mean_ssim,
        }
    }

    pub fn psnrs(&self) -> Vec<f64> {
        self.per_frame.iter().map(|q| q.psnr).collect()
    }
}
