mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use ris_capnet::channel::seeded_rng;
use ris_capnet::nn::*;
use ris_capnet::Error;

fn raw_layers(net: &DenseNet) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    net.layers()
        .iter()
        .map(|l| {
            let w = l.weights.rows().into_iter().map(|r| r.to_vec()).collect();
            (w, l.bias.to_vec())
        })
        .collect()
}

fn random_net(dims: &[usize], seed: u64) -> DenseNet {
    let mut rng = seeded_rng(seed);
    let mut net = DenseNet::new(dims, &mut rng).unwrap();
    // Non-zero biases so that every parameter is exercised.
    for l in net.layers_mut() {
        l.bias.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    net
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// L(net, x) = c·y for a fixed direction c.
fn projected_output(net: &DenseNet, x: &[f64], c: &[f64]) -> f64 {
    let (y, _) = net.forward(x).unwrap();
    y.iter().zip(c).map(|(a, b)| a * b).sum()
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut rng = seeded_rng(10);
    for seed in 0..10 {
        let net = random_net(&[7, 12, 9, 3], seed);
        let oracle = raw_layers(&net);
        for _ in 0..5 {
            let x = random_vec(7, &mut rng);
            let (y, _) = net.forward(&x).unwrap();
            let want = forward_oracle(&oracle, &x);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn batch_forward_agrees_with_single_forward() {
    let net = random_net(&[5, 8, 2], 3);
    let mut rng = seeded_rng(11);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| random_vec(5, &mut rng)).collect();
    let batch = Array2::from_shape_vec((6, 5), rows.concat()).unwrap();
    let out = net.predict(batch.view()).unwrap();
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(out.row(i).to_vec(), net.forward(r).unwrap().0);
    }
}

fn check_gradients(dims: &[usize], seed: u64) {
    let net = random_net(dims, seed);
    let mut rng = seeded_rng(seed ^ 0xABCD);
    let x = random_vec(dims[0], &mut rng);
    let c = random_vec(*dims.last().unwrap(), &mut rng);
    let (_, tape) = net.forward(&x).unwrap();
    let (grads, dx) = net.backward(&tape, &c).unwrap();

    let fd_x = central_difference(|xp| projected_output(&net, xp, &c), &x, 1e-5);
    for (g, f) in dx.iter().zip(&fd_x) {
        assert!(close(*g, *f, 1e-4, 1e-7), "input grad {g} vs {f} for {dims:?}");
    }

    for (k, layer_grad) in grads.layers.iter().enumerate() {
        let w0 = net.layers()[k].weights.clone();
        let flat: Vec<f64> = w0.iter().copied().collect();
        let fd = central_difference(
            |wp| {
                let mut n = net.clone();
                n.layers_mut()[k].weights = Array2::from_shape_vec(w0.dim(), wp.to_vec()).unwrap();
                projected_output(&n, &x, &c)
            },
            &flat,
            1e-5,
        );
        for (g, f) in layer_grad.weights.iter().zip(&fd) {
            assert!(close(*g, *f, 1e-4, 1e-7), "weight grad {g} vs {f} for {dims:?}");
        }
        let b0 = net.layers()[k].bias.to_vec();
        let fd = central_difference(
            |bp| {
                let mut n = net.clone();
                n.layers_mut()[k].bias = Array1::from(bp.to_vec());
                projected_output(&n, &x, &c)
            },
            &b0,
            1e-5,
        );
        for (g, f) in layer_grad.bias.iter().zip(&fd) {
            assert!(close(*g, *f, 1e-4, 1e-7), "bias grad {g} vs {f} for {dims:?}");
        }
    }
}

#[test]
fn gradients_match_finite_differences_for_one_to_three_layers() {
    let mut rng = seeded_rng(12);
    for seed in 0..30u64 {
        let depth = 1 + (seed % 3) as usize;
        let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=32)).collect();
        check_gradients(&dims, seed);
    }
}

#[test]
fn zero_output_gradient_gives_zero_gradients() {
    let net = random_net(&[4, 6, 3], 1);
    let (_, tape) = net.forward(&[0.1, -0.2, 0.3, 0.4]).unwrap();
    let (g, dx) = net.backward(&tape, &[0.0; 3]).unwrap();
    assert!(g.is_zero());
    assert!(dx.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_input_gradient_is_weight_transpose_times_direction() {
    let net = random_net(&[4, 3], 2);
    let c = [0.5, -1.0, 2.0];
    let (_, tape) = net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let (_, dx) = net.backward(&tape, &c).unwrap();
    let w = &net.layers()[0].weights;
    for j in 0..4 {
        let want: f64 = (0..3).map(|i| w[(i, j)] * c[i]).sum();
        assert!((dx[j] - want).abs() <= 1e-15);
    }
}

#[test]
fn forward_rejects_wrong_input_length() {
    let net = random_net(&[4, 2], 3);
    assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Dimension(_))));
}

#[test]
fn tape_from_before_an_update_is_refused() {
    let mut net = random_net(&[3, 4, 1], 4);
    let (_, tape) = net.forward(&[1.0, 0.5, -0.5]).unwrap();
    let (g, _) = net.backward(&tape, &[1.0]).unwrap();
    let mut st = AdamState::new(&net, 1e-2);
    adam_step(&mut net, &g, &mut st).unwrap();
    assert!(matches!(net.backward(&tape, &[1.0]), Err(Error::StaleTape { .. })));
}

#[test]
fn glorot_initialization_bounds() {
    let net = DenseNet::new(&[30, 50, 10], &mut seeded_rng(5)).unwrap();
    for l in net.layers() {
        let bound = (6.0 / (l.input_dim() + l.output_dim()) as f64).sqrt();
        assert!(l.weights.iter().all(|w| w.abs() <= bound));
        let max = l.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max > 0.9 * bound);
    }
    assert_eq!(net.layer_dims(), vec![30, 50, 10]);
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut net = random_net(&[3, 5, 2], 6);
    let before = net.clone();
    let (_, tape) = net.forward(&[0.0; 3]).unwrap();
    let (g, _) = net.backward(&tape, &[0.0, 0.0]).unwrap();
    let mut st = AdamState::new(&net, 1e-3);
    adam_step(&mut net, &g, &mut st).unwrap();
    assert_eq!(net.layers(), before.layers());
    assert_eq!(st.step_count, 1);
}

#[test]
fn adam_first_step_on_a_scalar_moves_by_learning_rate() {
    let layer = Dense {
        weights: Array2::from_elem((1, 1), 0.7),
        bias: Array1::from(vec![0.0]),
    };
    let mut net = DenseNet::from_layers(vec![layer]).unwrap();
    let grad = Gradients {
        layers: vec![Dense {
            weights: Array2::from_elem((1, 1), 1.0),
            bias: Array1::from(vec![0.0]),
        }],
    };
    let lr = 1e-3;
    let mut st = AdamState::new(&net, lr);
    adam_step(&mut net, &grad, &mut st).unwrap();
    let moved = 0.7 - net.layers()[0].weights[(0, 0)];
    assert!((moved - lr).abs() <= 1e-6, "{moved}");
    assert_eq!(net.layers()[0].bias[0], 0.0);
}

/// Minibatch MSE regression with Adam; returns the per-epoch losses.
fn fit(seed: u64, epochs: usize) -> (DenseNet, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| random_vec(3, &mut rng)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0] - 2.0 * x[1] + 0.5 * x[2] * x[2]).collect();
    let mut net = DenseNet::new(&[3, 16, 1], &mut rng).unwrap();
    let mut st = AdamState::new(&net, 1e-2);
    let mut losses = Vec::new();
    for _ in 0..epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(xs.len(), 32, &mut rng) {
            let x = gather_rows(3, &batch, |i| xs[i].clone());
            let t: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let tape = net.forward_batch(x.view()).unwrap();
            let pred: Vec<f64> = tape.output().column(0).to_vec();
            let (loss, g) = mse_loss(&pred, &t).unwrap();
            total += loss * batch.len() as f64;
            let g = Array2::from_shape_vec((batch.len(), 1), g).unwrap();
            let (grads, _) = net.backward_batch(&tape, g.view()).unwrap();
            adam_step(&mut net, &grads, &mut st).unwrap();
            assert!(net.is_finite());
        }
        losses.push(total / xs.len() as f64);
    }
    (net, losses)
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let (net_a, loss_a) = fit(7, 100);
    let (net_b, loss_b) = fit(7, 100);
    assert_eq!(loss_a, loss_b);
    assert_eq!(net_a.layers(), net_b.layers());
    assert!(loss_a.last().unwrap() < &(0.1 * loss_a[0]));
}

#[test]
fn mse_examples_and_loop_oracle() {
    assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
    let (l, g) = mse_loss(&[2.0], &[0.0]).unwrap();
    assert_eq!((l, g), (4.0, vec![4.0]));
    assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
    let mut rng = seeded_rng(8);
    for _ in 0..20 {
        let p = random_vec(17, &mut rng);
        let t = random_vec(17, &mut rng);
        let mut acc = 0.0;
        for i in 0..17 {
            acc += (p[i] - t[i]) * (p[i] - t[i]);
        }
        let (l, g) = mse_loss(&p, &t).unwrap();
        assert!((l - acc / 17.0).abs() <= 1e-12);
        for i in 0..17 {
            assert!((g[i] - 2.0 * (p[i] - t[i]) / 17.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn model_file_round_trip_is_bitwise() {
    let net = random_net(&[6, 10, 4, 2], 9);
    let model = ModelFile {
        role: "test".into(),
        meta: vec![("n".into(), 4.0), ("scale".into(), 1.25e5)],
        net: net.clone(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.capn");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_bytes().unwrap(), std::fs::read(&path).unwrap());
    let mut rng = seeded_rng(10);
    for _ in 0..10 {
        let x = random_vec(6, &mut rng);
        assert_eq!(net.forward(&x).unwrap().0, back.net.forward(&x).unwrap().0);
    }
}

#[test]
fn damaged_model_files_are_rejected() {
    let model = ModelFile {
        role: "test".into(),
        meta: vec![],
        net: random_net(&[2, 3, 1], 11),
    };
    let bytes = model.to_bytes().unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(ModelFile::from_bytes(&bad_magic), Err(Error::Format { .. })));
    let mut bad_version = bytes.clone();
    bad_version[4] = 99;
    assert!(matches!(ModelFile::from_bytes(&bad_version), Err(Error::Format { .. })));
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x01;
    assert!(ModelFile::from_bytes(&flipped).is_err());
    for cut in [3, 10, bytes.len() - 1] {
        assert!(ModelFile::from_bytes(&bytes[..cut]).is_err());
    }
    let err = load_model("/nonexistent/dir/m.capn").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn rectifier_net_is_scale_covariant_without_biases() {
    let mut net = random_net(&[5, 7, 6, 2], 12);
    for l in net.layers_mut() {
        l.bias.fill(0.0);
    }
    let x = random_vec(5, &mut seeded_rng(13));
    let (_, base) = net.forward(&x).unwrap();
    for c in [0.5, 2.0] {
        let xs: Vec<f64> = x.iter().map(|v| c * v).collect();
        let (_, scaled) = net.forward(&xs).unwrap();
        for (h0, h1) in base.hidden().iter().zip(scaled.hidden()) {
            for (a, b) in h0.iter().zip(h1.iter()) {
                assert!((c * a - b).abs() <= 1e-12);
            }
        }
        for (a, b) in base.output().iter().zip(scaled.output().iter()) {
            assert!((c * a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn batches_keep_the_last_partial_batch() {
    let b = shuffled_batches(10, 4, &mut seeded_rng(14));
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    let mut all: Vec<usize> = b.concat();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn parameters_stay_finite_after_updates(seed in any::<u64>(), lr in 1e-4f64..1e-1) {
        let mut net = random_net(&[4, 8, 2], seed);
        let mut st = AdamState::new(&net, lr);
        let mut rng = seeded_rng(seed);
        for _ in 0..10 {
            let x = random_vec(4, &mut rng);
            let (_, tape) = net.forward(&x).unwrap();
            let (g, _) = net.backward(&tape, &random_vec(2, &mut rng)).unwrap();
            adam_step(&mut net, &g, &mut st).unwrap();
        }
        prop_assert!(net.is_finite());
        prop_assert_eq!(st.step_count, 10);
    }
}
