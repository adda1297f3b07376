use std::time::Instant;

use choice_core::baselines::{BcConfig, BcModel, DenoiserConfig, DenoiserModel, NoiseSchedule, SelectionStrategy};
use choice_core::bundle::{PolicyBundle, PolicyModel};
use choice_core::numerics::{Activation, Dense, Mlp, SeededRng};
use choice_core::policy::{ActionChunk, ChoiceConfig, ChoicePolicyModel, FitConfig, NormalizationStats, Sample};

/// One observation, two equally likely chunks at `+d/2` and `-d/2`.
fn two_mode_samples(d: f64, per_mode: usize, t: usize) -> Vec<Sample> {
    (0..2 * per_mode)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            Sample {
                obs: vec![0.0],
                target: ActionChunk::new(t, 1, vec![sign * d / 2.0; t]).unwrap(),
            }
        })
        .collect()
}

#[test]
fn bc_memorizes_one_sample() {
    let data = vec![Sample {
        obs: vec![0.2, -0.1],
        target: ActionChunk::new(3, 2, vec![0.5, -0.3, 0.1, 0.9, -0.7, 0.2]).unwrap(),
    }];
    let cfg = BcConfig {
        horizon: 3,
        action_dim: 2,
        obs_dim: 2,
        feature_dim: 16,
        hidden_dim: 16,
    };
    let mut bc = BcModel::new(cfg, &mut SeededRng::new(1)).unwrap();
    let log = bc
        .fit(
            &data,
            &FitConfig {
                epochs: 1500,
                batch_size: 1,
                seed: 2,
                ..FitConfig::default()
            },
        )
        .unwrap();
    assert!(log.steps.last().unwrap().action < 1e-4);
}

#[test]
fn bc_averages_symmetric_modes() {
    let d = 1.0;
    let data = two_mode_samples(d, 50, 2);
    let cfg = BcConfig {
        horizon: 2,
        action_dim: 1,
        obs_dim: 1,
        feature_dim: 16,
        hidden_dim: 16,
    };
    let mut bc = BcModel::new(cfg, &mut SeededRng::new(3)).unwrap();
    bc.fit(
        &data,
        &FitConfig {
            epochs: 200,
            batch_size: 20,
            seed: 4,
            ..FitConfig::default()
        },
    )
    .unwrap();
    let pred = bc.infer(&[0.0]).unwrap();
    for &v in pred.values() {
        assert!(v.abs() < 0.05 * d, "prediction {v} not at the midpoint");
    }
}

#[test]
fn bc_rejects_bad_input() {
    let cfg = BcConfig {
        horizon: 2,
        action_dim: 1,
        obs_dim: 3,
        feature_dim: 4,
        hidden_dim: 4,
    };
    let mut bc = BcModel::new(cfg, &mut SeededRng::new(0)).unwrap();
    assert!(bc.infer(&[0.0]).is_err());
    assert!(bc.fit(&[], &FitConfig::default()).is_err());
}

/// Noise net that outputs exactly the noise needed to recover `x0` in one step.
fn exact_residual_denoiser(x0: &[f64]) -> DenoiserModel {
    let n = x0.len();
    let cfg = DenoiserConfig {
        horizon: n,
        action_dim: 1,
        obs_dim: 1,
        feature_dim: 2,
        hidden_dim: 2 * n,
        steps: 1,
        beta_start: 0.5,
        beta_end: 0.5,
        time_embed_dim: 2,
    };
    let schedule = NoiseSchedule::linear(1, 0.5, 0.5).unwrap();
    let ab = schedule.alpha_bars[0];
    let encoder = Mlp::zeros(&[1, 4, 4, 2], Activation::Relu).unwrap();
    let input = cfg.feature_dim + n + cfg.time_embed_dim;
    let mut l0 = Dense::zeros(input, 2 * n);
    let mut l1 = Dense::zeros(2 * n, 2 * n);
    let mut l2 = Dense::zeros(2 * n, n);
    for i in 0..n {
        // h = [relu(x), relu(-x)], passed through unchanged, then recombined
        l0.weight.data_mut()[i * input + cfg.feature_dim + i] = 1.0;
        l0.weight.data_mut()[(n + i) * input + cfg.feature_dim + i] = -1.0;
        l1.weight.data_mut()[i * 2 * n + i] = 1.0;
        l1.weight.data_mut()[(n + i) * 2 * n + n + i] = 1.0;
        let c = 1.0 / (1.0 - ab).sqrt();
        l2.weight.data_mut()[i * 2 * n + i] = c;
        l2.weight.data_mut()[i * 2 * n + n + i] = -c;
        l2.bias.data_mut()[i] = -ab.sqrt() * x0[i] * c;
    }
    let net = Mlp::from_layers(vec![l0, l1, l2], Activation::Identity).unwrap();
    DenoiserModel::from_parts(cfg, encoder, net, schedule).unwrap()
}

#[test]
fn single_step_exact_residual_recovers_chunk() {
    let x0 = [0.7, -1.3, 2.5];
    let model = exact_residual_denoiser(&x0);
    let mut rng = SeededRng::new(8);
    for _ in 0..10 {
        let out = model.sample(&[0.0], &mut rng).unwrap();
        for (o, x) in out.values().iter().zip(&x0) {
            assert!((o - x).abs() < 1e-12, "{o} vs {x}");
        }
    }
}

#[test]
fn denoiser_samples_land_on_modes() {
    let d = 1.0;
    let raw = two_mode_samples(d, 200, 2);
    let stats = NormalizationStats::from_samples(&raw).unwrap();
    let data = stats.normalize_samples(&raw).unwrap();
    let mut cfg = DenoiserConfig::new(1, 1);
    cfg.horizon = 2;
    let mut model = DenoiserModel::new(cfg, &mut SeededRng::new(11)).unwrap();
    model
        .fit(
            &data,
            &FitConfig {
                epochs: 150,
                batch_size: 32,
                seed: 12,
                ..FitConfig::default()
            },
        )
        .unwrap();
    let bundle = PolicyBundle::new(PolicyModel::Denoiser(model), stats).unwrap();
    let mut rng = SeededRng::new(13);
    let mut near = 0;
    let mut signs = [0, 0];
    for _ in 0..200 {
        let chunk = bundle.decide(&[0.0], SelectionStrategy::Score, &mut rng).unwrap().chunk;
        let close_to = |m: f64| chunk.values().iter().all(|v| (v - m).abs() <= 0.25 * d);
        if close_to(d / 2.0) {
            near += 1;
            signs[0] += 1;
        } else if close_to(-d / 2.0) {
            near += 1;
            signs[1] += 1;
        }
    }
    assert!(near >= 160, "only {near}/200 samples near a mode");
    assert!(signs[0] > 20 && signs[1] > 20, "mode coverage {signs:?}");
}

#[test]
fn choice_inference_is_much_faster_than_denoising() {
    let mut choice_cfg = ChoiceConfig::new(4, 2);
    choice_cfg.horizon = 8;
    let choice = ChoicePolicyModel::new(choice_cfg, &mut SeededRng::new(1)).unwrap();
    let den = DenoiserModel::new(DenoiserConfig::new(4, 2), &mut SeededRng::new(2)).unwrap();
    assert_eq!(den.config().steps, 50);
    let obs = [0.1, 0.2, 0.3, 0.4];
    let mut rng = SeededRng::new(3);
    let calls = 200;
    let t0 = Instant::now();
    for _ in 0..calls {
        std::hint::black_box(choice.infer(&obs).unwrap());
    }
    let choice_time = t0.elapsed();
    let t1 = Instant::now();
    for _ in 0..calls {
        std::hint::black_box(den.sample(&obs, &mut rng).unwrap());
    }
    let den_time = t1.elapsed();
    assert!(
        choice_time * 10 <= den_time,
        "choice {choice_time:?} vs denoiser {den_time:?}"
    );
}
