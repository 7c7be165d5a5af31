//! Stride-1 "same" 2-D cross-correlation with explicit forward and backward
//! passes.
//!
//! Inputs are `[C, H, W]` tensors. Each channel is first copied into a padded
//! buffer, after which every pass is a sequence of row-wise multiply-adds
//! over contiguous slices. Accumulation order is fixed, so results are
//! bit-reproducible for identical inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RfrError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    /// Wrap around (toroidal). Makes the layer exactly shift-equivariant.
    #[default]
    Circular,
    /// Repeat the border pixel.
    Replicate,
    Zero,
}

impl PaddingMode {
    /// Maps a possibly out-of-range coordinate to a source coordinate, or
    /// `None` when the sample is an implicit zero.
    #[inline]
    pub fn source(self, i: isize, n: usize) -> Option<usize> {
        let n_i = n as isize;
        match self {
            PaddingMode::Circular => Some(i.rem_euclid(n_i) as usize),
            PaddingMode::Replicate => Some(i.clamp(0, n_i - 1) as usize),
            PaddingMode::Zero => (0..n_i).contains(&i).then_some(i as usize),
        }
    }
}

impl std::str::FromStr for PaddingMode {
    type Err = RfrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(PaddingMode::Circular),
            "replicate" => Ok(PaddingMode::Replicate),
            "zero" => Ok(PaddingMode::Zero),
            other => Err(RfrError::InvalidArgument(format!("unknown padding mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    /// `[out_ch, in_ch, kh, kw]`
    pub weights: Tensor,
    /// `[out_ch]`
    pub bias: Tensor,
    pub padding: PaddingMode,
}

impl ConvLayerParams {
    pub fn new(weights: Tensor, bias: Tensor, padding: PaddingMode) -> Result<Self> {
        let ws = weights.shape();
        if ws.len() != 4 {
            return Err(RfrError::InvalidArgument(format!(
                "conv weights must be rank 4, got shape {ws:?}"
            )));
        }
        if ws[2] % 2 == 0 || ws[3] % 2 == 0 {
            return Err(RfrError::InvalidArgument(format!(
                "kernel size must be odd, got {}x{}",
                ws[2], ws[3]
            )));
        }
        if bias.shape() != [ws[0]] {
            return Err(RfrError::shape("conv bias", &[ws[0]], bias.shape()));
        }
        Ok(ConvLayerParams { weights, bias, padding })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

fn check_input(input: &Tensor, layer: &ConvLayerParams, op: &'static str) -> Result<Geometry> {
    let s = input.shape();
    let (kh, kw) = layer.kernel();
    if s.len() != 3 {
        return Err(RfrError::shape(op, &[layer.in_channels(), kh, kw], s));
    }
    if s[0] != layer.in_channels() {
        return Err(RfrError::shape(op, &[layer.in_channels(), s[1], s[2]], s));
    }
    if s[1] < kh || s[2] < kw {
        return Err(RfrError::InvalidArgument(format!(
            "{op}: spatial size {}x{} smaller than kernel {kh}x{kw}",
            s[1], s[2]
        )));
    }
    Ok(Geometry {
        c_in: s[0],
        h: s[1],
        w: s[2],
        kh,
        kw,
    })
}

/// Copies each channel into a `(H + 2ph) × (W + 2pw)` buffer whose border is
/// filled according to the padding mode.
fn pad_input(input: &[f64], g: &Geometry, padding: PaddingMode) -> Vec<f64> {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let (hp, wp) = (g.h + 2 * ph, g.w + 2 * pw);
    let xs: Vec<Option<usize>> = (0..wp).map(|x| padding.source(x as isize - pw as isize, g.w)).collect();
    let mut out = vec![0.0; g.c_in * hp * wp];
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for yy in 0..hp {
            let Some(sy) = padding.source(yy as isize - ph as isize, g.h) else {
                continue;
            };
            let src = &plane[sy * g.w..(sy + 1) * g.w];
            let dst = &mut out[(c * hp + yy) * wp..(c * hp + yy + 1) * wp];
            dst[pw..pw + g.w].copy_from_slice(src);
            for x in (0..pw).chain(pw + g.w..wp) {
                if let Some(sx) = xs[x] {
                    dst[x] = src[sx];
                }
            }
        }
    }
    out
}

/// Adds a gradient w.r.t. the padded buffer back onto the unpadded input.
fn fold_padded(padded: &[f64], g: &Geometry, padding: PaddingMode) -> Vec<f64> {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let (hp, wp) = (g.h + 2 * ph, g.w + 2 * pw);
    let xs: Vec<Option<usize>> = (0..wp).map(|x| padding.source(x as isize - pw as isize, g.w)).collect();
    let mut out = vec![0.0; g.c_in * g.h * g.w];
    for c in 0..g.c_in {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for yy in 0..hp {
            let Some(sy) = padding.source(yy as isize - ph as isize, g.h) else {
                continue;
            };
            let src = &padded[(c * hp + yy) * wp..(c * hp + yy + 1) * wp];
            let dst = &mut plane[sy * g.w..(sy + 1) * g.w];
            for (d, s) in dst.iter_mut().zip(&src[pw..pw + g.w]) {
                *d += s;
            }
            for x in (0..pw).chain(pw + g.w..wp) {
                if let Some(sx) = xs[x] {
                    dst[sx] += src[x];
                }
            }
        }
    }
    out
}

#[inline]
fn axpy_taps(acc: &mut [f64], row: &[f64], taps: &[f64]) {
    let n = acc.len();
    match *taps {
        [w0, w1, w2] => {
            for (x, a) in acc.iter_mut().enumerate() {
                *a += w0 * row[x] + w1 * row[x + 1] + w2 * row[x + 2];
            }
        }
        _ => {
            for (kx, &wv) in taps.iter().enumerate() {
                for (a, r) in acc.iter_mut().zip(&row[kx..kx + n]) {
                    *a += wv * r;
                }
            }
        }
    }
}

pub fn conv2d_forward(input: &Tensor, layer: &ConvLayerParams) -> Result<Tensor> {
    let g = check_input(input, layer, "conv2d_forward")?;
    let c_out = layer.out_channels();
    let padded = pad_input(input.data(), &g, layer.padding);
    let (hp, wp) = (g.h + 2 * (g.kh / 2), g.w + 2 * (g.kw / 2));
    let wt = layer.weights.data();
    let mut out = vec![0.0; c_out * g.h * g.w];
    for o in 0..c_out {
        let plane = &mut out[o * g.h * g.w..(o + 1) * g.h * g.w];
        plane.fill(layer.bias.data()[o]);
        for y in 0..g.h {
            let acc = &mut plane[y * g.w..(y + 1) * g.w];
            for c in 0..g.c_in {
                for ky in 0..g.kh {
                    let row = &padded[(c * hp + y + ky) * wp..(c * hp + y + ky + 1) * wp];
                    let base = ((o * g.c_in + c) * g.kh + ky) * g.kw;
                    axpy_taps(acc, row, &wt[base..base + g.kw]);
                }
            }
        }
    }
    Tensor::from_vec(&[c_out, g.h, g.w], out)
}

/// Full backward pass: gradients w.r.t. input, weights and bias.
pub fn conv2d_backward(input: &Tensor, layer: &ConvLayerParams, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let grads = conv2d_backward_with(input, layer, grad_out, true)?;
    Ok((grads.input.unwrap(), grads.weights, grads.bias))
}

/// Backward pass that skips the input gradient when `want_input` is false
/// (the first layer of a network never needs it).
pub fn conv2d_backward_with(
    input: &Tensor,
    layer: &ConvLayerParams,
    grad_out: &Tensor,
    want_input: bool,
) -> Result<ConvGrads> {
    let g = check_input(input, layer, "conv2d_backward")?;
    let c_out = layer.out_channels();
    let expected = [c_out, g.h, g.w];
    if grad_out.shape() != expected {
        return Err(RfrError::shape("conv2d_backward", &expected, grad_out.shape()));
    }
    let hw = g.h * g.w;
    let go = grad_out.data();
    let (hp, wp) = (g.h + 2 * (g.kh / 2), g.w + 2 * (g.kw / 2));
    let wt = layer.weights.data();

    let bias: Vec<f64> = go.chunks_exact(hw).map(|c| c.iter().sum()).collect();

    // grad_w[o,c,ky,kx] = sum_{y,x} go[o,y,x] * padded[c, y+ky, x+kx], with
    // one W-wide partial-sum row per tap reduced once at the end.
    let padded = pad_input(input.data(), &g, layer.padding);
    let taps = g.kh * g.kw;
    let mut gw = vec![0.0; wt.len()];
    let mut partial = vec![0.0; taps * g.w];
    for o in 0..c_out {
        let gplane = &go[o * hw..(o + 1) * hw];
        for c in 0..g.c_in {
            partial.fill(0.0);
            for y in 0..g.h {
                let grow = &gplane[y * g.w..(y + 1) * g.w];
                for ky in 0..g.kh {
                    let row = &padded[(c * hp + y + ky) * wp..(c * hp + y + ky + 1) * wp];
                    for kx in 0..g.kw {
                        let acc = &mut partial[(ky * g.kw + kx) * g.w..(ky * g.kw + kx + 1) * g.w];
                        for ((a, gv), r) in acc.iter_mut().zip(grow).zip(&row[kx..kx + g.w]) {
                            *a += gv * r;
                        }
                    }
                }
            }
            let base = (o * g.c_in + c) * taps;
            for (tap, acc) in partial.chunks_exact(g.w).enumerate() {
                gw[base + tap] = sum_pairwise(acc);
            }
        }
    }
    drop(padded);

    // d padded[c, yy, j] = sum_{o,ky,kx} w[o,c,ky,kx] * go[o, yy-ky, j-kx]:
    // a correlation of x-zero-padded grad_out rows with the x-reversed taps.
    let grad_input = if want_input {
        let ext = g.kw - 1;
        let gx_w = g.w + 2 * ext;
        let mut gox = vec![0.0; c_out * g.h * gx_w];
        for (dst, src) in gox.chunks_exact_mut(gx_w).zip(go.chunks_exact(g.w)) {
            dst[ext..ext + g.w].copy_from_slice(src);
        }
        let mut gpad = vec![0.0; g.c_in * hp * wp];
        let mut rev = vec![0.0; g.kw];
        for c in 0..g.c_in {
            for o in 0..c_out {
                for ky in 0..g.kh {
                    let base = ((o * g.c_in + c) * g.kh + ky) * g.kw;
                    for (r, w) in rev.iter_mut().zip(wt[base..base + g.kw].iter().rev()) {
                        *r = *w;
                    }
                    for y in 0..g.h {
                        let grow = &gox[(o * g.h + y) * gx_w..(o * g.h + y + 1) * gx_w];
                        let dst = &mut gpad[(c * hp + y + ky) * wp..(c * hp + y + ky + 1) * wp];
                        axpy_taps(dst, grow, &rev);
                    }
                }
            }
        }
        Some(Tensor::from_vec(
            &[g.c_in, g.h, g.w],
            fold_padded(&gpad, &g, layer.padding),
        )?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: grad_input,
        weights: Tensor::from_vec(layer.weights.shape(), gw)?,
        bias: Tensor::from_vec(&[c_out], bias)?,
    })
}

/// Sum with four interleaved accumulators (fixed order).
#[inline]
fn sum_pairwise(a: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for (l, v) in acc.iter_mut().enumerate() {
            *v += a[4 * i + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for v in &a[chunks * 4..] {
        s += v;
    }
    s
}
