use fairaudit_core::grl::{
    bce_with_logit, encode, gen_synthetic, grl_backward, grl_forward, posthoc_probe, total_loss, train_adversarial,
    AdvSetup, Architecture, GrlConfig, LabeledData, PosthocConfig, SyntheticDataSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
// Central differences of an O(1) loss carry ~1e-10 of rounding noise, so
// relative errors are measured against at least this magnitude.
const FLOOR: f64 = 1e-5;

fn batch(dim: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let y = (0..n).map(|i| (i % 2) as u8).collect();
    let z = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
    (x, y, z)
}

#[derive(Clone, Copy)]
enum Part {
    Encoder,
    Head(usize),
    Disc(usize),
}

fn params(setup: &AdvSetup, part: Part) -> Vec<f64> {
    match part {
        Part::Encoder => setup.encoder.params(),
        Part::Head(i) => setup.task_heads[i].params(),
        Part::Disc(i) => setup.discriminators[i].params(),
    }
}

fn with_params(setup: &AdvSetup, part: Part, p: &[f64]) -> AdvSetup {
    let mut s = setup.clone();
    match part {
        Part::Encoder => s.encoder.set_params(p),
        Part::Head(i) => s.task_heads[i].set_params(p),
        Part::Disc(i) => s.discriminators[i].set_params(p),
    }
    s
}

/// Largest relative error between analytic gradients and central differences
/// of the objective each part descends: the task loss for heads, the
/// adversary loss for discriminators, `task - lambda * adversary` for the encoder.
fn max_relative_error(setup: &AdvSetup, lambda: f64, seed: u64) -> f64 {
    let (x, y, z) = batch(setup.encoder.input_dim(), 8, seed);
    let (_, grads) = total_loss(setup, &x, &y, &z, lambda).unwrap();
    let mut parts = vec![(Part::Encoder, grads.encoder.clone())];
    parts.extend(
        grads
            .task_heads
            .iter()
            .enumerate()
            .map(|(i, g)| (Part::Head(i), g.clone())),
    );
    parts.extend(
        grads
            .discriminators
            .iter()
            .enumerate()
            .map(|(i, g)| (Part::Disc(i), g.clone())),
    );

    let objective = |s: &AdvSetup, part: Part| {
        let (loss, _) = total_loss(s, &x, &y, &z, lambda).unwrap();
        match part {
            Part::Encoder => loss.task - lambda * loss.adversary,
            Part::Head(_) => loss.task,
            Part::Disc(_) => loss.adversary,
        }
    };
    let mut worst: f64 = 0.0;
    for (part, analytic) in parts {
        let base = params(setup, part);
        for k in 0..base.len() {
            let mut up = base.clone();
            up[k] += EPS;
            let mut down = base.clone();
            down[k] -= EPS;
            let numeric = (objective(&with_params(setup, part, &up), part)
                - objective(&with_params(setup, part, &down), part))
                / (2.0 * EPS);
            let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}

/// Fresh networks have zero biases, which can park pre-activations exactly on
/// the ReLU kink where central differences disagree with the one-sided
/// derivative. Jitter every parameter to move off it.
fn jittered(setup: AdvSetup, seed: u64) -> AdvSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = vec![Part::Encoder];
    parts.extend((0..setup.task_heads.len()).map(Part::Head));
    parts.extend((0..setup.discriminators.len()).map(Part::Disc));
    parts.into_iter().fold(setup, |s, part| {
        let p: Vec<f64> = params(&s, part)
            .iter()
            .map(|v| v + rng.random_range(-0.2..0.2))
            .collect();
        with_params(&s, part, &p)
    })
}

fn arch(encoder: &[usize], discriminators: usize) -> Architecture {
    Architecture {
        encoder: encoder.to_vec(),
        head_hidden: vec![4],
        discriminator_hidden: vec![5, 3],
        task_heads: 1,
        discriminators,
    }
}

#[test]
fn gradients_match_finite_differences() {
    for encoder in [&[2, 2, 1][..], &[4, 8, 2], &[8, 8, 8, 1]] {
        for discriminators in [1, 2] {
            let setup = jittered(AdvSetup::new(&arch(encoder, discriminators), 3).unwrap(), 3);
            for lambda in [0.0, 0.7, 1.0] {
                let err = max_relative_error(&setup, lambda, 5);
                assert!(
                    err < 1e-4,
                    "encoder {encoder:?}, {discriminators} discriminators, lambda {lambda}: {err:e}"
                );
            }
        }
    }
}

#[test]
fn two_task_heads_check_too() {
    let mut a = arch(&[4, 6, 3], 2);
    a.task_heads = 2;
    let setup = jittered(AdvSetup::new(&a, 9).unwrap(), 9);
    assert!(max_relative_error(&setup, 1.0, 2) < 1e-4);
}

#[test]
fn discriminator_gradients_match_a_standalone_twin() {
    let setup = AdvSetup::new(&arch(&[4, 8, 2], 2), 1).unwrap();
    let (x, y, z) = batch(4, 16, 4);
    let (_, grads) = total_loss(&setup, &x, &y, &z, 1.0).unwrap();
    let reps = encode(&setup, &x).unwrap();
    let scale = 1.0 / x.len() as f64;
    for (k, disc) in setup.discriminators.iter().enumerate() {
        let twin = disc.clone();
        let mut g = vec![0.0; twin.param_count()];
        for (h, &label) in reps.iter().zip(&z) {
            let t = twin.trace(h).unwrap();
            let (_, d) = bce_with_logit(t.logits()[0], label);
            twin.backward(&t, &[d * scale], &mut g);
        }
        assert_eq!(g, grads.discriminators[k]);
    }
}

#[test]
fn encoder_gradient_is_affine_in_lambda() {
    let setup = AdvSetup::new(&arch(&[4, 8, 2], 2), 8).unwrap();
    let (x, y, z) = batch(4, 12, 1);
    let g = |lambda| total_loss(&setup, &x, &y, &z, lambda).unwrap().1.encoder;
    let (g0, g1, g3) = (g(0.0), g(1.0), g(3.0));
    for k in 0..g0.len() {
        let predicted = g0[k] + 3.0 * (g1[k] - g0[k]);
        assert!((g3[k] - predicted).abs() < 1e-10);
    }
}

fn train(
    data: &LabeledData,
    discriminators: usize,
    lambda: f64,
    seed: u64,
) -> (AdvSetup, fairaudit_core::grl::TrainReport) {
    let mut setup = AdvSetup::new(
        &Architecture {
            discriminators,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let config = GrlConfig {
        lambda,
        seed,
        ..Default::default()
    };
    let report = train_adversarial(data, &mut setup, &config).unwrap();
    (setup, report)
}

#[test]
fn lambda_zero_follows_the_baseline() {
    let data = gen_synthetic(&SyntheticDataSpec {
        samples: 400,
        ..Default::default()
    })
    .unwrap();
    let mut config = GrlConfig {
        lambda: 0.0,
        epochs: 5,
        ..Default::default()
    };
    let mut with = AdvSetup::new(&Architecture::default(), 2).unwrap();
    let mut without = AdvSetup::new(
        &Architecture {
            discriminators: 0,
            ..Default::default()
        },
        2,
    )
    .unwrap();
    let a = train_adversarial(&data, &mut with, &config).unwrap();
    let b = train_adversarial(&data, &mut without, &config).unwrap();
    assert_eq!(with.encoder, without.encoder);
    assert_eq!(with.task_heads, without.task_heads);
    for (ea, eb) in a.epochs.iter().zip(&b.epochs) {
        assert_eq!(ea.task_loss, eb.task_loss);
        assert_eq!(ea.task_accuracy, eb.task_accuracy);
    }
    config.lambda = 1.0;
    let mut reversed = AdvSetup::new(&Architecture::default(), 2).unwrap();
    train_adversarial(&data, &mut reversed, &config).unwrap();
    assert_ne!(reversed.encoder, without.encoder);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn junction_composes(h in proptest::collection::vec(-10.0f64..10.0, 1..16), l1 in 0.0f64..5.0, l2 in 0.0f64..5.0) {
        prop_assert_eq!(grl_forward(&grl_forward(&h)), h.clone());
        let twice = grl_backward(&grl_backward(&h, l1), l2);
        for (t, v) in twice.iter().zip(&h) {
            prop_assert!((t - l1 * l2 * v).abs() <= 1e-12 * (1.0 + v.abs() * l1 * l2));
        }
        let once = grl_backward(&h, l1);
        for (o, v) in once.iter().zip(&h) {
            prop_assert_eq!(*o, -l1 * v);
        }
    }
}

#[test]
fn orthogonal_attribute_is_hidden_from_the_adversary() {
    for seed in [0, 1] {
        let data = gen_synthetic(&SyntheticDataSpec {
            seed,
            ..Default::default()
        })
        .unwrap();
        let (_, report) = train(&data, 2, 1.0, seed);
        let adversary = report.final_adversary_accuracy.unwrap();
        assert!(
            report.final_task_accuracy >= 0.9,
            "seed {seed}: task {}",
            report.final_task_accuracy
        );
        assert!(
            (adversary - report.adversary_chance).abs() <= 0.15,
            "seed {seed}: adversary {adversary}"
        );
    }
}

#[test]
fn correlated_attribute_stays_recoverable() {
    let data = gen_synthetic(&SyntheticDataSpec {
        correlation: 0.6,
        ..Default::default()
    })
    .unwrap();
    let probe = PosthocConfig::default();
    let (debiased, _) = train(&data, 2, 1.0, 0);
    let (baseline, _) = train(&data, 0, 0.0, 0);
    let after = posthoc_probe(&encode(&debiased, &data.features).unwrap(), &data.protected, &probe).unwrap();
    let before = posthoc_probe(&encode(&baseline, &data.features).unwrap(), &data.protected, &probe).unwrap();
    assert!(after.auroc > 0.6, "{}", after.auroc);
    assert!(after.auroc < before.auroc, "{} vs {}", after.auroc, before.auroc);
}

#[test]
fn posthoc_probe_on_noise_is_at_chance() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let reps: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let protected: Vec<u8> = (0..2000).map(|_| rng.random_range(0..2)).collect();
        let report = posthoc_probe(
            &reps,
            &protected,
            &PosthocConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((0.45..=0.55).contains(&report.auroc), "seed {seed}: {}", report.auroc);
    }
}
