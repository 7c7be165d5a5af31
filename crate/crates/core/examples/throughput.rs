//! Forward and forward+backward timings of a few network sizes on a 96x96 frame.

use rfr::conv::PaddingMode;
use rfr::denoiser::{Architecture, DenoiserParams};
use rfr::tensor::Tensor;
use std::time::Instant;

fn main() {
    for (depth, ch) in [(7, 48), (5, 16), (5, 12), (4, 16), (5, 8)] {
        let arch = Architecture {
            depth,
            channels: ch,
            image_channels: 1,
            kernel_size: 3,
            padding: PaddingMode::Circular,
            residual: true,
        };
        let p = DenoiserParams::init(arch, 0).unwrap();
        let x = Tensor::full(&[1, 96, 96], 0.5);
        let n = 10;
        let t0 = Instant::now();
        for _ in 0..n {
            p.forward(&x).unwrap();
        }
        let fwd = t0.elapsed().as_secs_f64() / n as f64;
        let t0 = Instant::now();
        for _ in 0..n {
            let (o, c) = p.forward_cached(&x).unwrap();
            p.backward(&c, &o).unwrap();
        }
        let fb = t0.elapsed().as_secs_f64() / n as f64;
        let macs = 9216.0 * 9.0 * (2.0 * ch as f64 + (depth - 2) as f64 * (ch * ch) as f64);
        println!(
            "d{depth} c{ch}: fwd {:.2} ms ({:.2} GMAC/s), fwd+bwd {:.2} ms",
            fwd * 1e3,
            macs / fwd / 1e9,
            fb * 1e3
        );
    }
}
