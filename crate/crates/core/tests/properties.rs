//! Property checks for noise, synthetic video, metrics and equivariance,
//! each against an independent oracle.

mod common;

use common::*;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Normal};

use rfr::conv::PaddingMode;
use rfr::denoiser::{denoise, DenoiserParams};
use rfr::finetune::equivariance_report;
use rfr::frame::Frame;
use rfr::metrics::{psnr, ssim};
use rfr::noise::{add_noise, variance_reduction_oracle, NoiseSpec};
use rfr::video::{build_texture_corpus, generate_recurrent_video, tile_match_count, SynthSpec};

// ---- noise -------------------------------------------------------------

fn unit_samples(draw: u64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    NoiseSpec::gaussian(255.0, 42).fill(draw, &mut v);
    v
}

#[test]
fn noise_is_zero_mean() {
    let n = 1_000_000;
    let v = unit_samples(0, n);
    let mean = v.iter().sum::<f64>() / n as f64;
    let se = 1.0 / (n as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean:e} vs 3 SE {:e}", 3.0 * se);
}

#[test]
fn draws_are_uncorrelated() {
    let n = 100_000;
    let a = unit_samples(1, n);
    let b = unit_samples(2, n);
    let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() < 0.01, "correlation {corr}");
}

#[test]
fn gaussian_sampler_passes_ks() {
    let n = 100_000;
    let mut v = unit_samples(3, n);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut d = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d
            .max((f - i as f64 / n as f64).abs())
            .max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let critical = 1.6276 / (n as f64).sqrt();
    assert!(d < critical, "KS statistic {d} >= {critical}");
}

#[test]
fn add_noise_sample_std_and_determinism() {
    let clean = Frame::filled(1, 256, 256, 0.5);
    let spec = NoiseSpec::gaussian(25.0, 9);
    let noisy = add_noise(&clean, &spec, 17);
    let diff = noisy.tensor().sub(clean.tensor()).unwrap();
    let m = diff.mean();
    let std = (diff.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / diff.len() as f64).sqrt();
    assert!((std / (25.0 / 255.0) - 1.0).abs() < 0.02, "std {std}");
    assert_eq!(add_noise(&clean, &spec, 17), noisy);
    assert_ne!(add_noise(&clean, &spec, 18), noisy);
    assert_eq!(add_noise(&clean, &NoiseSpec::gaussian(0.0, 9), 17), clean);
    // unclamped
    assert!(noisy.data().iter().any(|&v| v > 0.5 + 3.0 * 25.0 / 255.0));
}

#[test]
fn averaging_shrinks_noise_by_sqrt_t() {
    let clean = random_frame(5, 1, 256, 256);
    let spec = NoiseSpec::gaussian(40.0, 77);
    for (t, tol) in [(1, 0.02), (4, 0.05), (8, 0.05)] {
        let r = variance_reduction_oracle(&clean, &spec, t, None).unwrap();
        assert!(r.relative_error() <= tol, "T={t}: {r:?}");
    }
    let sigma = spec.sigma();
    let plain = variance_reduction_oracle(&clean, &spec, 4, None).unwrap();
    let restored = variance_reduction_oracle(&clean, &spec, 4, Some(sigma / 4.0)).unwrap();
    let ratio = plain.averaged_sigma / restored.averaged_sigma;
    assert!((ratio / 4.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

// ---- synthetic video ---------------------------------------------------

fn fft2(frame: &Frame) -> Vec<Complex<f64>> {
    let (h, w) = (frame.height(), frame.width());
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(w);
    let col = planner.plan_fft_forward(h);
    let mut buf: Vec<Complex<f64>> = frame.data()[..h * w].iter().map(|&v| Complex::new(v, 0.0)).collect();
    for r in buf.chunks_mut(w) {
        row.process(r);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    buf
}

/// Translation taking `a` to `b` by phase correlation, as signed `(dx, dy)`.
fn phase_correlation(a: &Frame, b: &Frame) -> (i64, i64) {
    let (h, w) = (a.height(), a.width());
    let fa = fft2(a);
    let fb = fft2(b);
    let mut cross: Vec<Complex<f64>> = fa
        .iter()
        .zip(&fb)
        .map(|(x, y)| {
            let p = y * x.conj();
            let n = p.norm();
            if n > 1e-12 {
                p / n
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    // inverse 2-D transform via conjugation
    for v in cross.iter_mut() {
        *v = v.conj();
    }
    let real = Frame::from_vec(1, h, w, cross.iter().map(|c| c.re).collect()).unwrap();
    let imag = Frame::from_vec(1, h, w, cross.iter().map(|c| c.im).collect()).unwrap();
    let (fr, fi) = (fft2(&real), fft2(&imag));
    let corr: Vec<f64> = fr
        .iter()
        .zip(&fi)
        .map(|(r, i)| (r + Complex::new(0.0, 1.0) * i).re)
        .collect();
    let (best, _) = corr.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    let signed = |v: usize, n: usize| if v > n / 2 { v as i64 - n as i64 } else { v as i64 };
    (signed(best % w, w), signed(best / w, h))
}

#[test]
fn motion_metadata_matches_phase_correlation() {
    for seed in 0..3 {
        let spec = SynthSpec {
            frames: 8,
            max_shift: 16,
            seed,
            ..SynthSpec::default()
        };
        let seq = generate_recurrent_video(&spec).unwrap();
        for t in 1..seq.len() {
            let step = seq.step_motion(t).unwrap();
            assert!(step.0.abs() <= 16 && step.1.abs() <= 16);
            let est = phase_correlation(&seq.frames[t - 1], &seq.frames[t]);
            assert_eq!(est, step, "seed {seed}, frame {}", t + 1);
        }
    }
}

#[test]
fn frames_are_exact_translates_of_the_first() {
    let seq = generate_recurrent_video(&SynthSpec {
        frames: 10,
        max_shift: 7,
        channels: 3,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    let motion = seq.motion.clone().unwrap();
    for (t, f) in seq.frames.iter().enumerate() {
        let (dx, dy) = motion[t];
        assert_eq!(*f, seq.frames[0].shift(dx, dy));
    }
}

#[test]
fn recurrence_exceeds_unique_control() {
    let base = SynthSpec {
        frames: 1,
        max_shift: 0,
        seed: 2,
        ..SynthSpec::default()
    };
    let recurrent = generate_recurrent_video(&SynthSpec {
        tile_bank_size: 2,
        ..base.clone()
    })
    .unwrap();
    let unique = generate_recurrent_video(&SynthSpec {
        tile_bank_size: base.n_tiles(),
        ..base.clone()
    })
    .unwrap();
    let r = tile_match_count(&recurrent.frames[0], 16);
    let u = tile_match_count(&unique.frames[0], 16);
    assert!(r > u, "recurrent {r} vs unique {u}");
}

#[test]
fn corpus_statistics_and_disjointness() {
    let corpus = build_texture_corpus(1000, 40, 96).unwrap();
    assert_eq!(corpus, build_texture_corpus(1000, 40, 96).unwrap());
    let mean = corpus.iter().map(|f| f.tensor().mean()).sum::<f64>() / corpus.len() as f64;
    assert!((0.35..=0.65).contains(&mean), "corpus mean {mean}");
    for f in &corpus {
        let (lo, hi) = f
            .data()
            .iter()
            .fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo <= 0.02 && hi >= 0.98, "histogram [{lo}, {hi}]");
    }
    for seed in [0, 1, 2, 1000] {
        let seq = generate_recurrent_video(&SynthSpec {
            frames: 5,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        for f in &seq.frames {
            assert!(corpus.iter().all(|c| c != f));
        }
    }
}

// ---- metrics -----------------------------------------------------------

#[test]
fn psnr_constant_offsets() {
    let mut r = rng(31);
    for (offset, expected) in [(0.1, 20.0), (0.05, 10.0 * 400f64.log10())] {
        for c in [1, 3] {
            let x = Frame::from_tensor(uniform(&mut r, &[c, 16, 16], 0.0, 0.9)).unwrap();
            let y = Frame::from_tensor(x.tensor().map(|v| v + offset)).unwrap();
            let got = psnr(&x, &y).unwrap();
            assert!((got - expected).abs() < 1e-9, "offset {offset}: {got}");
        }
    }
    assert!((10.0 * 400f64.log10() - 26.0206).abs() < 1e-4);
    let x = random_frame(1, 1, 12, 12);
    assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    assert_eq!(rfr::metrics::format_db(f64::INFINITY), "inf");
}

#[test]
fn ssim_matches_reference_on_fixtures() {
    let fixtures = ssim_fixtures();
    assert_eq!(fixtures.len(), 10);
    for (i, (x, y)) in fixtures.iter().enumerate() {
        let got = ssim(x, y).unwrap();
        let want = reference_ssim(x, y);
        assert!((got - want).abs() < 1e-6, "fixture {i}: {got} vs {want}");
        assert!((-1.0..=1.0).contains(&got));
    }
    let x = &fixtures[3].0;
    assert!((ssim(x, x).unwrap() - 1.0).abs() < 1e-12);
    assert!(ssim(&random_frame(9, 1, 10, 20), &random_frame(9, 1, 10, 20)).is_err());
}

// ---- equivariance ------------------------------------------------------

fn random_shifts(seed: u64, n: usize, size: i64) -> Vec<(i64, i64)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (r.gen_range(-size..size), r.gen_range(-size..size)))
        .collect()
}

#[test]
fn circular_network_is_shift_equivariant() {
    let p = random_net(3, 5, 8, PaddingMode::Circular);
    let frame = random_frame(8, 1, 96, 96);
    let dev = equivariance_report(&p, &frame, &random_shifts(1, 10, 96)).unwrap();
    assert!(dev <= 1e-10, "{dev:e}");
}

#[test]
fn zero_weight_network_has_zero_deviation() {
    let p = DenoiserParams::zeros(arch(4, 6, PaddingMode::Zero)).unwrap();
    let frame = random_frame(8, 1, 32, 32);
    assert_eq!(equivariance_report(&p, &frame, &[(8, 8), (-3, 5)]).unwrap(), 0.0);
    assert_eq!(denoise(&p, &frame).unwrap(), frame);
}

#[test]
fn zero_padding_breaks_equivariance() {
    let p = random_net(3, 5, 8, PaddingMode::Circular).with_padding(PaddingMode::Zero);
    let frame = random_frame(8, 1, 48, 48);
    let dev = equivariance_report(&p, &frame, &[(8, 8)]).unwrap();
    assert!(dev > 0.0);
}

#[test]
fn network_accepts_any_frame_size() {
    let p = random_net(4, 4, 6, PaddingMode::Circular);
    for (h, w) in [(64, 64), (96, 96), (13, 40)] {
        let out = denoise(&p, &random_frame(1, 1, h, w)).unwrap();
        assert_eq!(out.shape(), [1, h, w]);
    }
    let too_many_channels = random_frame(1, 3, 16, 16);
    assert!(denoise(&p, &too_many_channels).is_err());
}
