use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sirtnet::network::{
    conv2d_dilated, evaluate_loss, train_epoch, AdamConfig, AdamState, ConvKernel, MsdNetwork,
    Sample,
};
use sirtnet::Image;

/// Direct evaluation of one output pixel of a dilated convolution.
fn naive_conv(input: &[f64], n: usize, w: &[f64], bias: f64, d: usize) -> Vec<f64> {
    let channels = w.len() / 9;
    let mut out = vec![0.0; n * n];
    for y in 0..n as isize {
        for x in 0..n as isize {
            let mut acc = bias;
            for c in 0..channels {
                for i in -1isize..=1 {
                    for j in -1isize..=1 {
                        let (sy, sx) = (y - i * d as isize, x - j * d as isize);
                        if sy < 0 || sx < 0 || sy >= n as isize || sx >= n as isize {
                            continue;
                        }
                        let wv = w[c * 9 + ((i + 1) * 3 + (j + 1)) as usize];
                        acc += wv * input[c * n * n + (sy as usize) * n + sx as usize];
                    }
                }
            }
            out[(y as usize) * n + x as usize] = acc;
        }
    }
    out
}

/// Second, independent forward implementation driven by the documented
/// parameter layout.
fn direct_forward(params: &[f64], depth: usize, p: usize, input: &[f64], n: usize) -> Vec<f64> {
    let mut stack: Vec<Vec<f64>> = vec![input.to_vec()];
    let mut at = 0;
    for i in 0..depth {
        let nw = 9 * (i + 1);
        let w = &params[at..at + nw];
        let b = params[at + nw];
        at += nw + 1;
        let flat: Vec<f64> = stack.concat();
        let pre = naive_conv(&flat, n, w, b, i % p + 1);
        stack.push(pre.into_iter().map(|v| v.max(0.0)).collect());
    }
    let w = &params[at..at + depth + 1];
    let b = params[at + depth + 1];
    (0..n * n)
        .map(|k| (b + (0..=depth).map(|c| w[c] * stack[c][k]).sum::<f64>()).tanh())
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

#[test]
fn dilation_two_one_hot_matches_oracle() {
    let mut img = vec![0.0f64; 25];
    img[12] = 1.0;
    let w: Vec<f64> = (1..=9).map(|v| v as f64).collect();
    let k = ConvKernel::new(w.clone(), 0.0, 2).unwrap();
    let out = conv2d_dilated(&img, 5, &k).unwrap();
    assert_eq!(out, naive_conv(&img, 5, &w, 0.0, 2));
    let nonzero: Vec<usize> = (0..25).filter(|&i| out[i] != 0.0).collect();
    // Centre (2,2) plus taps at ±2 rows/columns.
    assert_eq!(nonzero, vec![0, 2, 4, 10, 12, 14, 20, 22, 24]);
    // Convolution (flipped) convention: the (+1,+1) tap reads from (y−2, x−2).
    assert_eq!(out[24], 9.0);
    assert_eq!(out[0], 1.0);
}

#[test]
fn multichannel_conv_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in 1..=4 {
        let input = random_vec(&mut rng, 3 * 49, 1.0);
        let w = random_vec(&mut rng, 27, 1.0);
        let k = ConvKernel::new(w.clone(), 0.3, d).unwrap();
        let got = conv2d_dilated(&input, 7, &k).unwrap();
        let want = naive_conv(&input, 7, &w, 0.3, d);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn forward_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = MsdNetwork::<f64>::zeros(3, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 17).unwrap();
    let input = random_vec(&mut rng, 64, 1.0);
    let tape = net.forward(&input, 8).unwrap();
    let want = direct_forward(net.params(), 3, 10, &input, 8);
    for (a, b) in tape.output().iter().zip(&want) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn depth_one_is_a_composition() {
    let mut net = MsdNetwork::<f64>::zeros(1, 10).unwrap();
    net.init_uniform(-0.5, 0.5, 2).unwrap();
    let input: Vec<f64> = (0..36).map(|v| (v as f64 * 0.37).sin()).collect();
    let k = net.hidden_kernel(0);
    let hidden: Vec<f64> = conv2d_dilated(&input, 6, &k)
        .unwrap()
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let out_r = net.output_range();
    let (w0, w1, b) = (
        net.params()[out_r.start],
        net.params()[out_r.start + 1],
        net.params()[out_r.start + 2],
    );
    let tape = net.forward(&input, 6).unwrap();
    for k in 0..36 {
        let expect = (w0 * input[k] + w1 * hidden[k] + b).tanh();
        assert!((tape.output()[k] - expect).abs() < 1e-14);
    }
}

fn loss_f64(net: &MsdNetwork<f64>, input: &[f64], target: &[f64], n: usize) -> f64 {
    let out = net.forward(input, n).unwrap();
    out.output()
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t).powi(2))
        .sum::<f64>()
        / (n * n) as f64
}

#[test]
fn gradients_match_central_differences() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut net = MsdNetwork::<f64>::zeros(3, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 29).unwrap();
    let input: Vec<f64> = random_vec(&mut rng, n * n, 1.0)
        .iter()
        .map(|v| v.abs())
        .collect();
    let target = random_vec(&mut rng, n * n, 0.5);

    let tape = net.forward(&input, n).unwrap();
    let dout: Vec<f64> = tape
        .output()
        .iter()
        .zip(&target)
        .map(|(o, t)| 2.0 * (o - t) / (n * n) as f64)
        .collect();
    let analytic = net.backward(&tape, &dout).unwrap();

    let h = 1e-3;
    let mut worst = 0.0f64;
    for k in 0..net.n_params() {
        let mut plus = net.clone();
        plus.params_mut()[k] += h;
        let mut minus = net.clone();
        minus.params_mut()[k] -= h;
        let fd = (loss_f64(&plus, &input, &target, n) - loss_f64(&minus, &input, &target, n))
            / (2.0 * h);
        let a = analytic[k];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "param {k}: analytic {a}, fd {fd}");
    }
    println!("worst relative gradient error {worst:e}");
}

#[test]
fn dead_relu_unit_gets_no_gradient() {
    let mut net = MsdNetwork::<f64>::zeros(3, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 31).unwrap();
    let r = net.hidden_range(1);
    net.params_mut()[r.end - 1] = -100.0;
    let input = vec![0.5; 64];
    let tape = net.forward(&input, 8).unwrap();
    assert!(tape.channel(2).iter().all(|&v| v == 0.0));
    let g = net.backward(&tape, &vec![0.1; 64]).unwrap();
    assert!(g[r.clone()].iter().all(|&v| v == 0.0));
    // Other layers still learn.
    assert!(g[net.hidden_range(0)].iter().any(|&v| v != 0.0));
}

#[test]
fn every_hidden_layer_feeds_every_later_one() {
    let mut net = MsdNetwork::<f64>::zeros(4, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 37).unwrap();
    for l in 0..4 {
        let r = net.hidden_range(l);
        net.params_mut()[r.end - 1] = 1.0;
    }
    let input: Vec<f64> = (0..100).map(|v| (v as f64 * 0.13).cos().abs()).collect();
    let base = net.forward(&input, 10).unwrap();
    for j in 0..4 {
        let mut bumped = net.clone();
        let r = bumped.hidden_range(j);
        bumped.params_mut()[r.end - 1] += 0.5;
        let t = bumped.forward(&input, 10).unwrap();
        for i in j + 1..4 {
            assert_ne!(
                t.channel(i + 1),
                base.channel(i + 1),
                "layer {j} does not reach {i}"
            );
        }
        assert_ne!(t.output(), base.output());
    }
}

fn toy_sample(n: usize) -> Sample {
    let input: Vec<f32> = (0..n * n)
        .map(|k| {
            let (r, c) = ((k / n) as f32, (k % n) as f32);
            (((r - 3.5).powi(2) + (c - 4.0).powi(2)) < 9.0) as u8 as f32 * 0.8
        })
        .collect();
    let target: Vec<f32> = input.iter().map(|&v| 0.3 * v - 0.1).collect();
    Sample {
        input: Image::from_vec(n, input).unwrap(),
        target: Image::from_vec(n, target).unwrap(),
    }
}

fn overfit_run(seed: u64) -> Vec<f64> {
    let data = vec![toy_sample(8)];
    let mut net = MsdNetwork::<f32>::zeros(3, 10).unwrap();
    net.init_uniform(-0.25, 0.25, seed).unwrap();
    let cfg = AdamConfig {
        lr: 1e-2,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(cfg, net.n_params());
    (0..50)
        .map(|e| train_epoch(&mut net, &data, 10, &mut adam, seed + e).unwrap())
        .collect()
}

#[test]
fn single_sample_overfits() {
    let losses = overfit_run(4);
    println!("epoch 1 {:e}, epoch 50 {:e}", losses[0], losses[49]);
    assert!(losses[49] * 10.0 <= losses[0]);
}

#[test]
fn training_is_deterministic() {
    let a = overfit_run(8);
    let b = overfit_run(8);
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let data: Vec<Sample> = (0..4).map(|_| toy_sample(8)).collect();
    let mut net = MsdNetwork::<f32>::zeros(2, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 1).unwrap();
    let before = net.params().to_vec();
    let cfg = AdamConfig {
        lr: 0.0,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(cfg, net.n_params());
    let loss = train_epoch(&mut net, &data, 2, &mut adam, 0).unwrap();
    assert_eq!(net.params(), &before[..]);
    let eval = evaluate_loss(&net, &data).unwrap();
    assert!(
        (loss - eval).abs() <= 1e-12 * eval.max(1.0),
        "{loss} vs {eval}"
    );
}

#[test]
fn partial_last_batch_is_used() {
    let data: Vec<Sample> = (0..5).map(|_| toy_sample(8)).collect();
    let mut net = MsdNetwork::<f32>::zeros(2, 10).unwrap();
    net.init_uniform(-0.25, 0.25, 1).unwrap();
    let mut adam = AdamState::new(AdamConfig::default(), net.n_params());
    train_epoch(&mut net, &data, 2, &mut adam, 0).unwrap();
    assert_eq!(adam.step_count(), 3);
}

#[test]
fn uniform_init_moments() {
    let mut net = MsdNetwork::<f64>::zeros(150, 10).unwrap();
    assert!(net.n_params() >= 100_000);
    net.init_uniform(-0.25, 0.25, 99).unwrap();
    let p = net.params();
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let (lo, hi) = p
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo >= -0.25 && hi <= 0.25);
    // σ of U[-a, a] is a/√3; 3σ bound on the sample mean.
    let sigma = 0.25 / 3f64.sqrt();
    assert!(mean.abs() <= 3.0 * sigma / n.sqrt(), "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_stays_inside_open_unit_interval(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MsdNetwork::<f32>::zeros(3, 10).unwrap();
        net.init_uniform(-2.0, 2.0, seed).unwrap();
        let input: Vec<f32> = (0..36).map(|_| rng.random_range(-scale..scale) as f32).collect();
        let tape = net.forward(&input, 6).unwrap();
        prop_assert!(tape.output().iter().all(|&v| v > -1.0 && v < 1.0));
    }
}
