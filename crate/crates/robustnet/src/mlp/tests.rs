use super::*;
use crate::rng::stream_rng;
use ndarray::Array2;
use proptest::prelude::*;

fn zeroed(dims: &[usize], act: OutputActivation) -> MlpModel {
    let mut rng = stream_rng(0, &[0]);
    let mut m = MlpModel::new(dims, act, &mut rng).unwrap();
    for w in m.weights_mut() {
        w.fill(0.0);
    }
    m
}

#[test]
fn zero_weights_softmax_is_uniform() {
    let m = zeroed(&[6, 8, 4], OutputActivation::Softmax);
    let out = m.infer(&[3.0, -1.0, 0.5, 2.0, 9.0, -4.0]).unwrap();
    for v in out {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn zero_weights_sigmoid_is_half() {
    let m = zeroed(&[5, 7, 3], OutputActivation::Sigmoid);
    let out = m.infer(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    for v in out {
        assert!((v - 0.5).abs() < 1e-15);
    }
}

#[test]
fn forward_matches_straight_line_recomputation() {
    // Independent oracle: re-evaluate the affine + ReLU + softmax composition
    // with raw loops against the model's own forward pass.
    let mut rng = stream_rng(17, &[1]);
    let model = MlpModel::new(&[5, 7, 6, 4], OutputActivation::Softmax, &mut rng).unwrap();
    let input = [0.3, -1.2, 0.8, 2.1, -0.4];

    let mut a: Vec<f64> = input.to_vec();
    for l in 0..3 {
        let w = &model.weights()[l];
        let b = &model.biases()[l];
        let mut z = vec![0.0; w.nrows()];
        for o in 0..w.nrows() {
            let mut acc = b[o];
            for i in 0..w.ncols() {
                acc += w[[o, i]] * a[i];
            }
            z[o] = acc;
        }
        if l < 2 {
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        } else {
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            z = exps.iter().map(|e| e / total).collect();
        }
        a = z;
    }

    let got = model.infer(&input).unwrap();
    for (g, e) in got.iter().zip(&a) {
        assert!((g - e).abs() < 1e-14, "got {g}, oracle {e}");
    }
    let (fwd, _) = model.forward(&input).unwrap();
    assert_eq!(got, fwd);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let m = zeroed(&[4, 3], OutputActivation::Softmax);
    assert!(m.infer(&[1.0, 2.0]).is_err());
    assert!(m.forward(&[1.0; 5]).is_err());
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let mut rng = stream_rng(21, &[2]);
    let model = MlpModel::new(&[4, 6, 3], OutputActivation::Sigmoid, &mut rng).unwrap();
    let (_, tape) = model.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
    let grads = model.backward(&tape, &[0.0, 0.0, 0.0]).unwrap();
    for w in &grads.d_weights {
        assert!(w.iter().all(|&v| v == 0.0));
    }
    for b in &grads.d_biases {
        assert!(b.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn single_layer_softmax_matches_analytic_jacobian() {
    // Closed-form oracle: for y = softmax(Wx + b) and scalar u = g . y,
    // dz = (diag(y) - y y^T) g, dW = dz x^T, db = dz.
    let mut rng = stream_rng(33, &[3]);
    let model = MlpModel::new(&[3, 3], OutputActivation::Softmax, &mut rng).unwrap();
    let x = [0.7, -0.2, 1.4];
    let g = [1.3, -0.5, 0.2];

    let (y, tape) = model.forward(&x).unwrap();
    let grads = model.backward(&tape, &g).unwrap();

    let dot: f64 = y.iter().zip(&g).map(|(yi, gi)| yi * gi).sum();
    for o in 0..3 {
        let dz = y[o] * (g[o] - dot);
        assert!((grads.d_biases[0][o] - dz).abs() < 1e-10);
        for i in 0..3 {
            assert!((grads.d_weights[0][[o, i]] - dz * x[i]).abs() < 1e-10);
        }
    }
}

/// Central finite difference of a scalar test loss over every parameter.
/// Returns `None` when a hidden pre-activation sits close enough to the ReLU
/// kink that the probe itself would cross it (the objective is only
/// differentiable almost everywhere).
fn finite_difference_check(model: &mut MlpModel, input: &[f64], coeffs: &[f64]) -> Option<f64> {
    let (y, tape) = model.forward(input).unwrap();
    assert_eq!(y.len(), coeffs.len());
    for l in 0..model.num_layers() - 1 {
        if tape.pre[l].iter().any(|z| z.abs() < 1e-4) {
            return None;
        }
    }
    let grads = model.backward(&tape, coeffs).unwrap();

    let loss = |m: &MlpModel| -> f64 {
        m.infer(input)
            .unwrap()
            .iter()
            .zip(coeffs)
            .map(|(yi, ci)| yi * ci)
            .sum()
    };

    let step = 1e-6;
    let mut max_rel = 0.0f64;
    for l in 0..model.num_layers() {
        let shape = model.weights()[l].dim();
        for o in 0..shape.0 {
            for i in 0..shape.1 {
                let orig = model.weights()[l][[o, i]];
                model.weights_mut()[l][[o, i]] = orig + step;
                let plus = loss(model);
                model.weights_mut()[l][[o, i]] = orig - step;
                let minus = loss(model);
                model.weights_mut()[l][[o, i]] = orig;
                let fd = (plus - minus) / (2.0 * step);
                let analytic = grads.d_weights[l][[o, i]];
                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                max_rel = max_rel.max((analytic - fd).abs() / denom);
            }
        }
        for o in 0..shape.0 {
            let orig = model.biases()[l][o];
            model.biases_mut()[l][o] = orig + step;
            let plus = loss(model);
            model.biases_mut()[l][o] = orig - step;
            let minus = loss(model);
            model.biases_mut()[l][o] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let analytic = grads.d_biases[l][o];
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max((analytic - fd).abs() / denom);
        }
    }
    Some(max_rel)
}

#[test]
fn gradients_match_finite_differences_over_100_models() {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for trial in 0..120u64 {
        let mut rng = stream_rng(500, &[trial]);
        let act = if trial % 2 == 0 {
            OutputActivation::Softmax
        } else {
            OutputActivation::Sigmoid
        };
        let dims = [3 + (trial % 3) as usize, 6, 5, 2 + (trial % 2) as usize];
        let mut model = MlpModel::new(&dims, act, &mut rng).unwrap();
        let input: Vec<f64> = (0..dims[0]).map(|i| 0.5 * (i as f64) - 0.7).collect();
        let coeffs: Vec<f64> = (0..dims[3]).map(|i| 1.0 + 0.3 * i as f64).collect();
        if let Some(err) = finite_difference_check(&mut model, &input, &coeffs) {
            worst = worst.max(err);
            checked += 1;
        }
        if checked == 100 {
            break;
        }
    }
    assert!(checked >= 100, "only {checked} kink-free trials");
    assert!(worst < 1e-4, "max relative gradient error {worst}");
}

#[test]
fn batch_paths_match_single_sample_paths() {
    let mut rng = stream_rng(88, &[4]);
    let model = MlpModel::new(&[4, 9, 5], OutputActivation::Softmax, &mut rng).unwrap();
    let batch = 6;
    let inputs = Array2::from_shape_fn((batch, 4), |(r, c)| 0.1 * (r as f64) - 0.3 * (c as f64));
    let out_grads = Array2::from_shape_fn((batch, 5), |(r, c)| (r + c) as f64 * 0.2 - 0.4);

    let (outs, tape) = model.forward_batch(&inputs).unwrap();
    let batch_grads = model.backward_batch(&tape, &out_grads).unwrap();

    let mut summed = Gradients::zeros_like(&model);
    for s in 0..batch {
        let row: Vec<f64> = inputs.row(s).to_vec();
        let (y, t) = model.forward(&row).unwrap();
        for (a, b) in y.iter().zip(outs.row(s).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let g = model.backward(&t, &out_grads.row(s).to_vec()).unwrap();
        summed.add_assign(&g);
    }
    for l in 0..model.num_layers() {
        let diff = (&batch_grads.d_weights[l] - &summed.d_weights[l])
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-10, "layer {l} weight gradient diff {diff}");
        let diff = (&batch_grads.d_biases[l] - &summed.d_biases[l])
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-10, "layer {l} bias gradient diff {diff}");
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let mut rng = stream_rng(5, &[5]);
    let mut model = MlpModel::new(&[3, 4, 2], OutputActivation::Sigmoid, &mut rng).unwrap();
    let reference = model.clone();
    let mut grads = Gradients::zeros_like(&model);
    for w in &mut grads.d_weights {
        w.fill(1.5);
    }
    model
        .step(&grads, &OptimizerConfig::Sgd { learning_rate: 0.0 })
        .unwrap();
    assert!(model.same_parameters(&reference));
}

#[test]
fn sgd_takes_an_ascent_step() {
    let mut rng = stream_rng(6, &[6]);
    let mut model = MlpModel::new(&[2, 2], OutputActivation::Sigmoid, &mut rng).unwrap();
    let before = model.weights()[0].clone();
    let mut grads = Gradients::zeros_like(&model);
    grads.d_weights[0].fill(2.0);
    model
        .step(&grads, &OptimizerConfig::Sgd { learning_rate: 0.1 })
        .unwrap();
    for (after, b) in model.weights()[0].iter().zip(before.iter()) {
        assert!((after - (b + 0.1 * 2.0)).abs() < 1e-15);
    }
}

#[test]
fn non_finite_gradient_aborts_step() {
    let mut rng = stream_rng(7, &[7]);
    let mut model = MlpModel::new(&[2, 2], OutputActivation::Sigmoid, &mut rng).unwrap();
    let reference = model.clone();
    let mut grads = Gradients::zeros_like(&model);
    grads.d_weights[0][[0, 0]] = f64::NAN;
    let err = model.step(&grads, &OptimizerConfig::default());
    assert!(matches!(err, Err(crate::error::Error::Numerical(_))));
    assert!(model.same_parameters(&reference));
}

#[test]
fn adam_maximizes_a_toy_quadratic() {
    // Oracle: the unique maximizer of f(theta) = -sum c_i (theta_i - t_i)^2
    // is theta = t. Drive the model's first bias vector toward it.
    let mut rng = stream_rng(8, &[8]);
    let mut model = MlpModel::new(&[1, 4], OutputActivation::Sigmoid, &mut rng).unwrap();
    for w in model.weights_mut() {
        w.fill(0.0);
    }
    let targets = [0.8, -0.6, 0.25, -1.0];
    let curvature = [1.0, 2.0, 0.5, 3.0];
    let config = OptimizerConfig::adam(5e-4);
    let mut steps = 0;
    for _ in 0..5000 {
        steps += 1;
        let mut grads = Gradients::zeros_like(&model);
        for i in 0..4 {
            let theta = model.biases()[0][i];
            grads.d_biases[0][i] = -2.0 * curvature[i] * (theta - targets[i]);
        }
        model.step(&grads, &config).unwrap();
    }
    assert!(steps <= 5000);
    for i in 0..4 {
        let err = (model.biases()[0][i] - targets[i]).abs();
        assert!(err < 1e-3, "coordinate {i} off by {err}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut rng = stream_rng(9, &[9]);
    let model = MlpModel::new(&[6, 11, 4], OutputActivation::Softmax, &mut rng).unwrap();
    model.save_checkpoint(&path).unwrap();
    let loaded = MlpModel::load_checkpoint(&path).unwrap();
    assert!(model.same_parameters(&loaded));
    assert_eq!(loaded.output_activation(), OutputActivation::Softmax);

    // Identical forward outputs, bitwise.
    let input = [0.12, -0.5, 3.0, 0.0, -2.25, 1.0 / 3.0];
    assert_eq!(model.infer(&input).unwrap(), loaded.infer(&input).unwrap());
}

#[test]
fn truncated_checkpoint_is_a_format_error() {
    let mut rng = stream_rng(10, &[10]);
    let model = MlpModel::new(&[3, 5, 2], OutputActivation::Sigmoid, &mut rng).unwrap();
    let text = model.checkpoint_text().unwrap();
    let cut = &text[..text.len() * 2 / 3];
    assert!(matches!(
        MlpModel::from_checkpoint_text(cut),
        Err(crate::error::Error::Format(_))
    ));
}

#[test]
fn version_mismatch_is_refused() {
    let text = "robustnet-mlp-v999\nlayer_dims 2 2\n";
    let err = MlpModel::from_checkpoint_text(text);
    assert!(matches!(err, Err(crate::error::Error::Format(_))));
}

#[test]
fn identical_seeds_give_identical_parameters_after_steps() {
    let run = || {
        let mut rng = stream_rng(77, &[11]);
        let mut model = MlpModel::new(&[3, 8, 2], OutputActivation::Softmax, &mut rng).unwrap();
        let config = OptimizerConfig::default();
        for k in 0..50u64 {
            let input = [0.1 * k as f64, -0.2, 0.3];
            let (_, tape) = model.forward(&input).unwrap();
            let grads = model.backward(&tape, &[1.0, -1.0]).unwrap();
            model.step(&grads, &config).unwrap();
        }
        model
    };
    assert!(run().same_parameters(&run()));
}

proptest! {
    #[test]
    fn softmax_output_is_a_distribution(
        seed in 0u64..1000,
        input in proptest::collection::vec(-10.0f64..10.0, 5),
    ) {
        let mut rng = stream_rng(seed, &[12]);
        let model = MlpModel::new(&[5, 8, 4], OutputActivation::Softmax, &mut rng).unwrap();
        let out = model.infer(&input).unwrap();
        let total: f64 = out.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(out.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sigmoid_output_is_boxed(
        seed in 0u64..1000,
        input in proptest::collection::vec(-10.0f64..10.0, 5),
    ) {
        let mut rng = stream_rng(seed, &[13]);
        let model = MlpModel::new(&[5, 8, 3], OutputActivation::Sigmoid, &mut rng).unwrap();
        let out = model.infer(&input).unwrap();
        prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
