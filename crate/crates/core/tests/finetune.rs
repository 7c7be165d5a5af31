//! Fine-tuning loops checked against hand-unrolled versions of themselves
//! and against exact invariances.

mod common;

use common::*;
use rfr::conv::PaddingMode;
use rfr::denoiser::{denoise, DenoiserParams, Optimizer};
use rfr::finetune::offline::offline_draw;
use rfr::finetune::{
    self, finetune_f2f, finetune_offline, finetune_online, pseudo_pair_loss, pseudo_pair_loss_value, run_online,
    FineTuneConfig, FlowMode, OnlineModel,
};
use rfr::frame::Frame;
use rfr::loss::LossKind;
use rfr::methods::{MethodContext, MethodRegistry};
use rfr::noise::{corrupt_sequence, NoiseSpec};
use rfr::video::{generate_recurrent_video, SynthSpec, VideoSequence};
use rfr::RfrError;

fn small_video(max_shift: i64, frames: usize, seed: u64) -> (VideoSequence, VideoSequence, NoiseSpec) {
    let clean = generate_recurrent_video(&SynthSpec {
        frames,
        height: 32,
        width: 32,
        tile_size: 8,
        tile_bank_size: 3,
        max_shift,
        seed,
        ..SynthSpec::default()
    })
    .unwrap();
    let noise = NoiseSpec::gaussian(25.0, 90 + seed);
    let noisy = corrupt_sequence(&clean, &noise).unwrap();
    (clean, noisy, noise)
}

fn net(seed: u64) -> DenoiserParams {
    random_net(seed, 3, 4, PaddingMode::Circular)
}

fn config(k: usize, lr: f64) -> FineTuneConfig {
    FineTuneConfig {
        iterations: k,
        lr,
        seed: 3,
        ..FineTuneConfig::default()
    }
}

#[test]
fn offline_with_zero_iterations_is_the_baseline() {
    let (clean, noisy, noise) = small_video(2, 5, 1);
    let theta0 = net(1);
    let out = finetune_offline(&theta0, &noisy, &config(0, 1e-3), &noise, Some(&clean.frames)).unwrap();
    for (t, y) in noisy.frames.iter().enumerate() {
        let b = denoise(&theta0, y).unwrap();
        assert!(out.denoised.frames[t]
            .data()
            .iter()
            .zip(b.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(out.params, theta0);
    assert!(out.loss_trace.is_empty());
    assert_eq!(out.per_iteration_psnr.unwrap().len(), 1);
}

#[test]
fn single_frame_single_term_step_matches_manual_computation() {
    let (_, noisy, noise) = small_video(0, 1, 2);
    let theta0 = net(2);
    let cfg = FineTuneConfig {
        use_second_term: false,
        ..config(1, 1e-3)
    };
    let out = finetune_offline(&theta0, &noisy, &cfg, &noise, None).unwrap();

    let x0 = denoise(&theta0, &noisy.frames[0]).unwrap();
    let field = cfg.pseudo_noise(&noise).field(offline_draw(0, 0, 0), 1, 32, 32);
    let expected = pseudo_pair_loss_value(&theta0, &x0, &field, LossKind::L2).unwrap();
    assert_eq!(out.loss_trace, vec![expected]);

    let (_, grads) = pseudo_pair_loss(&theta0, &x0, &field, LossKind::L2).unwrap();
    let mut manual = theta0.clone();
    Optimizer::new(&theta0).step(&mut manual, &grads, cfg.lr).unwrap();
    assert_eq!(out.params, manual);
    assert_eq!(out.denoised.frames[0], denoise(&manual, &noisy.frames[0]).unwrap());
}

#[test]
fn second_term_adds_pairs_built_from_initial_restorations() {
    let (_, noisy, noise) = small_video(1, 3, 3);
    let theta0 = net(3);
    let cfg = config(2, 1e-3);
    let out = finetune_offline(&theta0, &noisy, &cfg, &noise, None).unwrap();

    let pseudo = cfg.pseudo_noise(&noise);
    let initial = finetune::restore_all(&theta0, &noisy.frames).unwrap();
    let mut params = theta0.clone();
    let mut opt = Optimizer::new(&params);
    for i in 0..2 {
        let current = finetune::restore_all(&params, &noisy.frames).unwrap();
        let mut total = 0.0;
        let mut grads = rfr::denoiser::ParamGrads::zeros_like(&params);
        for t in 0..noisy.len() {
            for (term, target) in [&current[t], &initial[t]].into_iter().enumerate() {
                let field = pseudo.field(offline_draw(i, t, term), 1, 32, 32);
                let (v, g) = pseudo_pair_loss(&params, target, &field, LossKind::L2).unwrap();
                total += v;
                grads.add_assign(&g).unwrap();
            }
        }
        assert_eq!(out.loss_trace[i], total);
        opt.step(&mut params, &grads, cfg.lr).unwrap();
    }
    assert_eq!(out.params, params);
}

#[test]
fn pseudo_pair_loss_is_translation_invariant() {
    let p = random_net(4, 5, 6, PaddingMode::Circular);
    let (_, noisy, noise) = small_video(0, 1, 4);
    let x = denoise(&p, &noisy.frames[0]).unwrap();
    let field = noise.field(1234, 1, 32, 32);
    for loss in [LossKind::L2, LossKind::L1] {
        let base = pseudo_pair_loss_value(&p, &x, &field, loss).unwrap();
        for (dx, dy) in [(1, 0), (5, -3), (-13, 31), (32, 32)] {
            let moved = pseudo_pair_loss_value(&p, &x.shift(dx, dy), &field.shift(dx, dy), loss).unwrap();
            assert!((base - moved).abs() <= 1e-8, "{loss:?} ({dx},{dy}): {base} vs {moved}");
        }
    }
}

#[test]
fn runs_are_deterministic_and_leave_theta0_untouched() {
    let (clean, noisy, noise) = small_video(3, 4, 5);
    let theta0 = net(5);
    let snapshot = theta0.clone();
    let registry = MethodRegistry::default();
    let cfg = config(2, 1e-3);
    let ctx = MethodContext {
        theta0: &theta0,
        noisy: &noisy,
        clean: Some(&clean.frames),
        config: &cfg,
        test_noise: &noise,
        search_radius: 4,
    };
    for name in registry.names() {
        let a = registry.get(name).unwrap().run(&ctx).unwrap();
        let b = registry.get(name).unwrap().run(&ctx).unwrap();
        assert_eq!(a.denoised.frames, b.denoised.frames, "{name}");
        assert_eq!(a.params, b.params, "{name}");
        assert_eq!(a.loss_trace, b.loss_trace, "{name}");
        assert_eq!(a.per_iteration_psnr, b.per_iteration_psnr, "{name}");
        assert_eq!(a.denoised.len(), noisy.len());
        assert_eq!(theta0, snapshot, "{name} mutated theta0");
    }
}

#[test]
fn loss_trace_counts_gradient_steps() {
    let (_, noisy, noise) = small_video(1, 4, 6);
    let theta0 = net(6);
    let cfg = FineTuneConfig {
        updates_per_frame: 2,
        ..config(3, 1e-3)
    };
    assert_eq!(
        finetune_offline(&theta0, &noisy, &cfg, &noise, None)
            .unwrap()
            .loss_trace
            .len(),
        3
    );
    assert_eq!(
        run_online(&theta0, &noisy, &cfg, &noise, None)
            .unwrap()
            .loss_trace
            .len(),
        6
    );
    let f2f = finetune_f2f(&theta0, &noisy, FlowMode::Oracle, &cfg, None).unwrap();
    assert_eq!(f2f.loss_trace.len(), 6);
}

#[test]
fn vanishing_learning_rate_reproduces_the_baseline() {
    let (_, noisy, noise) = small_video(2, 6, 7);
    let theta0 = net(7);
    let out = run_online(&theta0, &noisy, &config(0, 1e-300), &noise, None).unwrap();
    for (t, y) in noisy.frames.iter().enumerate() {
        let b = denoise(&theta0, y).unwrap();
        let dev = out.denoised.frames[t].tensor().max_abs_diff(b.tensor()).unwrap();
        assert!(dev <= 1e-9, "frame {}: {dev:e}", t + 1);
    }
}

#[test]
fn online_driver_chains_single_steps() {
    let (_, noisy, noise) = small_video(2, 4, 8);
    let theta0 = net(8);
    let cfg = config(0, 1e-3);
    let out = run_online(&theta0, &noisy, &cfg, &noise, None).unwrap();

    let mut model = OnlineModel::new(theta0.clone());
    let mut prev = denoise(&theta0, &noisy.frames[0]).unwrap();
    assert_eq!(out.denoised.frames[0], prev);
    for t in 1..noisy.len() {
        let (x, next, losses) = finetune_online(&model, &prev, &noisy.frames[t], t, &cfg, &noise).unwrap();
        assert_eq!(losses.len(), 1);
        assert_eq!(next.optimizer.steps(), t as u64);
        assert_eq!(out.denoised.frames[t], x);
        model = next;
        prev = x;
    }
    assert_eq!(out.params, model.params);
}

#[test]
fn oracle_warp_reproduces_the_previous_noise_field() {
    let (clean, noisy, _) = small_video(6, 5, 9);
    for t in 1..noisy.len() {
        let (dx, dy) = noisy.step_motion(t).unwrap();
        let warped = noisy.frames[t - 1].shift(dx, dy);
        let noise_prev = noisy.frames[t - 1].tensor().sub(clean.frames[t - 1].tensor()).unwrap();
        let noise_warped = warped.tensor().sub(clean.frames[t].tensor()).unwrap();
        let moved = Frame::from_tensor(noise_prev).unwrap().shift(dx, dy);
        assert!(moved.tensor().max_abs_diff(&noise_warped).unwrap() < 1e-15);
        let own = noisy.frames[t].tensor().sub(clean.frames[t].tensor()).unwrap();
        assert!(own.max_abs_diff(&noise_warped).unwrap() > 0.1);
    }
}

#[test]
fn f2f_on_a_static_video_uses_unwarped_pairs() {
    let (_, noisy, _) = small_video(0, 4, 10);
    let theta0 = net(10);
    let cfg = config(0, 1e-3);
    let oracle = finetune_f2f(&theta0, &noisy, FlowMode::Oracle, &cfg, None).unwrap();
    let bm = finetune_f2f(&theta0, &noisy, FlowMode::BlockMatch { search_radius: 0 }, &cfg, None).unwrap();
    assert_eq!(oracle.denoised.frames, bm.denoised.frames);
    let mut params = theta0.clone();
    let mut opt = Optimizer::new(&params);
    for t in 1..noisy.len() {
        let (out, cache) = params.forward_cached(noisy.frames[t].tensor()).unwrap();
        let g = LossKind::L2.grad(&out, noisy.frames[t - 1].tensor()).unwrap();
        let grads = params.backward(&cache, &g).unwrap();
        opt.step(&mut params, &grads, cfg.lr).unwrap();
    }
    assert_eq!(oracle.params, params);
}

#[test]
fn input_errors_are_structured() {
    let (_, noisy, noise) = small_video(1, 3, 11);
    let rgb = random_net(1, 3, 4, PaddingMode::Circular);
    let mut rgb_arch = rgb.arch;
    rgb_arch.image_channels = 3;
    let rgb = DenoiserParams::init(rgb_arch, 1).unwrap();
    assert!(matches!(
        finetune_offline(&rgb, &noisy, &config(1, 1e-3), &noise, None),
        Err(RfrError::ShapeMismatch { .. })
    ));
    let one = VideoSequence::new(vec![noisy.frames[0].clone()], None, noisy.recurrence_level).unwrap();
    let bm = FlowMode::BlockMatch { search_radius: 2 };
    assert!(matches!(
        finetune_f2f(&net(1), &one, bm, &config(1, 1e-3), None),
        Err(RfrError::InvalidArgument(_))
    ));
    let no_motion = VideoSequence::new(noisy.frames.clone(), None, noisy.recurrence_level).unwrap();
    assert!(finetune_f2f(&net(1), &no_motion, FlowMode::Oracle, &config(1, 1e-3), None).is_err());
    assert!(matches!(
        finetune_offline(&net(1), &noisy, &config(1, 0.0), &noise, None),
        Err(RfrError::InvalidArgument(_))
    ));
    let huge = finetune_offline(&net(1), &noisy, &config(3, 1e30), &noise, None);
    match huge {
        Err(RfrError::NonFiniteLoss {
            stage,
            iteration,
            frame,
        }) => {
            assert_eq!(stage, "offline");
            assert!(iteration >= 1 && frame >= 1);
        }
        other => panic!("expected a non-finite loss, got {:?}", other.map(|r| r.loss_trace)),
    }
}
