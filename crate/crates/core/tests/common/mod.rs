#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfr::conv::{conv2d_backward, conv2d_forward, ConvLayerParams, PaddingMode};
use rfr::denoiser::{Architecture, DenoiserParams};
use rfr::frame::Frame;
use rfr::loss::LossKind;
use rfr::noise::{add_noise, NoiseSpec};
use rfr::tensor::Tensor;
use rfr::video::build_texture_corpus;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn layer(rng: &mut impl Rng, c_out: usize, c_in: usize, k: usize, padding: PaddingMode) -> ConvLayerParams {
    ConvLayerParams::new(
        uniform(rng, &[c_out, c_in, k, k], -0.5, 0.5),
        uniform(rng, &[c_out], -0.2, 0.2),
        padding,
    )
    .unwrap()
}

pub fn arch(depth: usize, channels: usize, padding: PaddingMode) -> Architecture {
    Architecture {
        depth,
        channels,
        image_channels: 1,
        kernel_size: 3,
        padding,
        residual: true,
    }
}

/// Random network whose biases are also non-zero.
pub fn random_net(seed: u64, depth: usize, channels: usize, padding: PaddingMode) -> DenoiserParams {
    let mut p = DenoiserParams::init(arch(depth, channels, padding), seed).unwrap();
    let mut r = rng(seed ^ 0xB1A5);
    for l in &mut p.layers {
        for b in l.bias.data_mut() {
            *b = r.gen_range(-0.1..0.1);
        }
    }
    p
}

pub const H: f64 = 1e-5;

/// Central difference of `f` w.r.t. every entry of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut g = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + H;
        let up = f(&probe);
        probe.data_mut()[i] = orig - H;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * H);
    }
    g
}

/// Largest componentwise `|a − n| / max(|a|, |n|)`; pairs where both sides
/// are below `1e-7` only need to agree absolutely to `1e-9`.
pub fn max_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        let scale = a.abs().max(n.abs());
        let err = if scale < 1e-7 {
            if (a - n).abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (a - n).abs() / scale
        };
        worst = worst.max(err);
    }
    worst
}

/// Dot product, used to turn tensor-valued ops into scalar losses.
pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn random_frame(seed: u64, c: usize, h: usize, w: usize) -> Frame {
    Frame::from_tensor(uniform(&mut rng(seed), &[c, h, w], 0.0, 1.0)).unwrap()
}

/// SSIM written directly from its definition: for each valid window position,
/// weighted means first, then weighted central moments.
pub fn reference_ssim(x: &Frame, y: &Frame) -> f64 {
    let n = 11;
    let g: Vec<f64> = (0..n).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = (1e-4, 9e-4);
    let (h, w) = (x.height(), x.width());
    let mut total = 0.0;
    for c in 0..x.channels() {
        let mut acc = 0.0;
        let mut count = 0;
        for y0 in 0..=h - n {
            for x0 in 0..=w - n {
                let weight = |i: usize, j: usize| g[i] * g[j] / (gs * gs);
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        mx += weight(i, j) * x.get(c, y0 + i, x0 + j);
                        my += weight(i, j) * y.get(c, y0 + i, x0 + j);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let dx = x.get(c, y0 + i, x0 + j) - mx;
                        let dy = y.get(c, y0 + i, x0 + j) - my;
                        vx += weight(i, j) * dx * dx;
                        vy += weight(i, j) * dy * dy;
                        cov += weight(i, j) * dx * dy;
                    }
                }
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / x.channels() as f64
}

pub fn ssim_fixtures() -> Vec<(Frame, Frame)> {
    let noisy = |f: &Frame, s: f64, seed| add_noise(f, &NoiseSpec::gaussian(s, seed), 0).clamp01();
    let tex = build_texture_corpus(55, 3, 32).unwrap();
    let small = random_frame(1, 1, 11, 11);
    let wide = random_frame(2, 1, 16, 23);
    let color = random_frame(3, 3, 20, 20);
    let blurred = {
        let k = Tensor::full(&[1, 1, 3, 3], 1.0 / 9.0);
        let layer = ConvLayerParams::new(k, Tensor::zeros(&[1]), PaddingMode::Replicate).unwrap();
        Frame::from_tensor(conv2d_forward(tex[0].tensor(), &layer).unwrap()).unwrap()
    };
    vec![
        (small.clone(), noisy(&small, 20.0, 1)),
        (wide.clone(), noisy(&wide, 50.0, 2)),
        (color.clone(), noisy(&color, 15.0, 3)),
        (tex[0].clone(), noisy(&tex[0], 25.0, 4)),
        (
            tex[1].clone(),
            Frame::from_tensor(tex[1].tensor().map(|v| 1.0 - v)).unwrap(),
        ),
        (
            tex[2].clone(),
            Frame::from_tensor(tex[2].tensor().map(|v| 0.8 * v + 0.1)).unwrap(),
        ),
        (tex[0].clone(), blurred),
        (Frame::filled(1, 14, 14, 0.3), random_frame(4, 1, 14, 14)),
        (tex[1].clone(), tex[2].clone()),
        (random_frame(5, 3, 12, 15), random_frame(6, 3, 12, 15)),
    ]
}

/// Worst relative error of input, weight and bias gradients of one random
/// convolution.
pub fn check_conv(seed: u64, c_in: usize, c_out: usize, k: usize, h: usize, w: usize, padding: PaddingMode) -> f64 {
    let mut r = rng(seed);
    let x = uniform(&mut r, &[c_in, h, w], -1.0, 1.0);
    let layer = layer(&mut r, c_out, c_in, k, padding);
    let probe = uniform(&mut r, &[c_out, h, w], -1.0, 1.0);
    let (gi, gw, gb) = conv2d_backward(&x, &layer, &probe).unwrap();

    let ni = numeric_grad(&x, |x| dot(&conv2d_forward(x, &layer).unwrap(), &probe));
    let nw = numeric_grad(&layer.weights, |wt| {
        let l = ConvLayerParams::new(wt.clone(), layer.bias.clone(), padding).unwrap();
        dot(&conv2d_forward(&x, &l).unwrap(), &probe)
    });
    let nb = numeric_grad(&layer.bias, |b| {
        let l = ConvLayerParams::new(layer.weights.clone(), b.clone(), padding).unwrap();
        dot(&conv2d_forward(&x, &l).unwrap(), &probe)
    });
    max_rel_err(&gi, &ni)
        .max(max_rel_err(&gw, &nw))
        .max(max_rel_err(&gb, &nb))
}

pub fn net_loss(p: &DenoiserParams, x: &Tensor, target: &Tensor, loss: LossKind) -> f64 {
    loss.value(&p.forward(x).unwrap(), target).unwrap()
}

/// Gradient of every weight and bias of the network via perturbing one
/// parameter tensor at a time.
pub fn check_network(p: &DenoiserParams, x: &Tensor, target: &Tensor, loss: LossKind) -> f64 {
    let (out, cache) = p.forward_cached(x).unwrap();
    let g = loss.grad(&out, target).unwrap();
    let grads = p.backward(&cache, &g).unwrap();
    let mut worst = 0.0f64;
    for (li, (gw, gb)) in grads.layers.iter().enumerate() {
        let nw = numeric_grad(&p.layers[li].weights, |wt| {
            let mut q = p.clone();
            q.layers[li].weights = wt.clone();
            net_loss(&q, x, target, loss)
        });
        let nb = numeric_grad(&p.layers[li].bias, |b| {
            let mut q = p.clone();
            q.layers[li].bias = b.clone();
            net_loss(&q, x, target, loss)
        });
        worst = worst.max(max_rel_err(gw, &nw)).max(max_rel_err(gb, &nb));
    }
    worst
}

/// Values bounded away from `kink` so the finite difference never straddles it.
pub fn away_from(r: &mut impl Rng, shape: &[usize], kink: &Tensor) -> Tensor {
    let mut t = uniform(r, shape, -1.0, 1.0);
    for (v, k) in t.data_mut().iter_mut().zip(kink.data()) {
        if (*v - k).abs() < 1e-3 {
            *v = k + 1e-2;
        }
    }
    t
}
