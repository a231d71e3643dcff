use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Direct seven-loop cross-correlation with explicit bounds checks.
fn naive_conv2d(input: &Tensor, kernel: &Tensor, pad: usize) -> Tensor {
    let (n, c_in, h, w) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let (c_out, kx, ky) = (kernel.shape()[1], kernel.shape()[2], kernel.shape()[3]);
    let (ho, wo) = (h + 2 * pad + 1 - kx, w + 2 * pad + 1 - ky);
    let mut out = Tensor::zeros(&[n, c_out, ho, wo]);
    for b in 0..n {
        for o in 0..c_out {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = 0.0;
                    for c in 0..c_in {
                        for a in 0..kx {
                            for e in 0..ky {
                                let (r, s) = (
                                    i as isize + a as isize - pad as isize,
                                    j as isize + e as isize - pad as isize,
                                );
                                if r >= 0 && s >= 0 && (r as usize) < h && (s as usize) < w {
                                    acc += input.get(&[b, c, r as usize, s as usize])
                                        * kernel.get(&[c, o, a, e]);
                                }
                            }
                        }
                    }
                    out.set(&[b, o, i, j], acc);
                }
            }
        }
    }
    out
}

fn forward_conv(input: &Tensor, kernel: &Tensor, pad: usize) -> Tensor {
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let k = tape.constant(kernel.clone());
    let y = tape.conv2d(x, k, pad).unwrap();
    tape.value(y).clone()
}

#[test]
fn conv2d_identity_kernel() {
    let input = Tensor::new(vec![1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
    let out = forward_conv(&input, &Tensor::ones(&[1, 1, 1, 1]), 0);
    assert_eq!(out, input);
}

#[test]
fn conv2d_sum_of_ones() {
    let out = forward_conv(
        &Tensor::ones(&[1, 1, 3, 3]),
        &Tensor::ones(&[1, 1, 3, 3]),
        0,
    );
    assert_eq!(out.shape(), &[1, 1, 1, 1]);
    assert_eq!(out.data(), &[9.0]);
}

#[test]
fn conv2d_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pad in [0, 1, 2] {
        let input = random(&[2, 3, 5, 5], &mut rng);
        let kernel = random(&[3, 4, 3, 3], &mut rng);
        let fast = forward_conv(&input, &kernel, pad);
        let slow = naive_conv2d(&input, &kernel, pad);
        assert_eq!(fast.shape(), slow.shape());
        assert!(fast.max_abs_diff(&slow) <= 1e-12, "pad {pad}");
    }
}

#[test]
fn conv2d_rectangular_kernel_and_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let input = random(&[1, 2, 4, 7], &mut rng);
    let kernel = random(&[2, 3, 1, 5], &mut rng);
    let fast = forward_conv(&input, &kernel, 1);
    assert_eq!(fast.shape(), &[1, 3, 6, 5]);
    assert!(fast.max_abs_diff(&naive_conv2d(&input, &kernel, 1)) <= 1e-12);
}

#[test]
fn conv2d_shape_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::ones(&[1, 2, 4, 4]));
    let wrong_cin = tape.constant(Tensor::ones(&[3, 1, 3, 3]));
    assert!(matches!(
        tape.conv2d(x, wrong_cin, 1),
        Err(HyveError::Dimension(_))
    ));
    let even = tape.constant(Tensor::ones(&[2, 1, 2, 2]));
    assert!(matches!(
        tape.conv2d(x, even, 0),
        Err(HyveError::Dimension(_))
    ));
    let too_big = tape.constant(Tensor::ones(&[2, 1, 7, 7]));
    assert!(matches!(
        tape.conv2d(x, too_big, 0),
        Err(HyveError::Dimension(_))
    ));
}

#[test]
fn non_finite_output_is_an_error() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::full(&[1, 1, 2, 2], f64::MAX));
    let k = tape.constant(Tensor::full(&[1, 1, 1, 1], 4.0));
    assert!(matches!(tape.conv2d(x, k, 0), Err(HyveError::Numeric(_))));
}

#[test]
fn depthwise_separable_single_channel_collapses_to_outer_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random(&[2, 1, 6, 6], &mut rng);
    let spatial = random(&[1, 1, 3, 3], &mut rng);
    let depth = random(&[1, 4, 1, 1], &mut rng);
    let outer = Tensor::from_fn(&[1, 4, 3, 3], |i| {
        depth.data()[i / 9] * spatial.data()[i % 9]
    });

    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let s = tape.constant(spatial);
    let d = tape.constant(depth);
    let y = tape.depthwise_separable_conv(x, s, d, 1).unwrap();
    let reference = naive_conv2d(&input, &outer, 1);
    assert!(tape.value(y).max_abs_diff(&reference) <= 1e-12);
}

#[test]
fn depthwise_separable_matches_two_stage_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let input = random(&[2, 3, 5, 6], &mut rng);
    let spatial = random(&[3, 1, 3, 3], &mut rng);
    let depth = random(&[3, 5, 1, 1], &mut rng);

    // Stage 1: each channel through its own single-channel convolution.
    let (n, c, h, w) = (2, 3, 5, 6);
    let mut stage1 = Tensor::zeros(&[n, c, h, w]);
    for ch in 0..c {
        let plane = Tensor::from_fn(&[n, 1, h, w], |i| {
            let (b, rest) = (i / (h * w), i % (h * w));
            input.data()[(b * c + ch) * h * w + rest]
        });
        let kernel = Tensor::from_fn(&[1, 1, 3, 3], |i| spatial.data()[ch * 9 + i]);
        let out = naive_conv2d(&plane, &kernel, 1);
        for b in 0..n {
            for r in 0..h * w {
                stage1.data_mut()[(b * c + ch) * h * w + r] = out.data()[b * h * w + r];
            }
        }
    }
    // Stage 2: 1×1 mixing.
    let reference = naive_conv2d(&stage1, &depth, 0);

    let mut tape = Tape::new();
    let x = tape.constant(input);
    let s = tape.constant(spatial);
    let d = tape.constant(depth);
    let y = tape.depthwise_separable_conv(x, s, d, 1).unwrap();
    assert!(tape.value(y).max_abs_diff(&reference) <= 1e-12);
}

#[test]
fn relu_pool_and_cross_entropy_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap());
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 2.0]);

    let c = tape.constant(Tensor::full(&[2, 3, 4, 5], 0.375));
    let p = tape.global_avg_pool(c).unwrap();
    assert_eq!(tape.value(p).shape(), &[2, 3]);
    assert!(tape.value(p).data().iter().all(|&v| v == 0.375));

    for classes in [2usize, 3, 7] {
        let logits = tape.constant(Tensor::full(&[4, classes], 1.25));
        let loss = tape.softmax_cross_entropy(logits, &[0, 1, 0, 1]).unwrap();
        assert!((tape.value(loss).data()[0] - (classes as f64).ln()).abs() < 1e-15);
    }
}

#[test]
fn cross_entropy_rejects_bad_labels() {
    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(
        tape.softmax_cross_entropy(logits, &[0, 3]),
        Err(HyveError::Input(_))
    ));
    assert!(matches!(
        tape.softmax_cross_entropy(logits, &[0]),
        Err(HyveError::Dimension(_))
    ));
}

#[test]
fn dense_layer_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let w = tape.constant(Tensor::new(vec![2, 3], vec![1.0, 0.0, -1.0, 0.5, 1.0, 2.0]).unwrap());
    let b = tape.constant(Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap());
    let y = tape.dense(x, w, b).unwrap();
    let expected = [2.1, 2.2, 3.3, 5.1, 4.2, 5.3];
    for (a, e) in tape.value(y).data().iter().zip(expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn sum_gradient_is_ones_and_unused_is_zero() {
    let mut tape = Tape::new();
    let x = tape.param(&Tensor::full(&[2, 3], 0.7));
    let unused = tape.param(&Tensor::full(&[4], 5.0));
    let s = tape.sum(x).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x), &Tensor::ones(&[2, 3]));
    assert_eq!(tape.grad(unused), &Tensor::zeros(&[4]));
}

#[test]
fn backward_rejects_non_scalar() {
    let mut tape = Tape::new();
    let x = tape.param(&Tensor::ones(&[3]));
    assert!(matches!(tape.backward(x), Err(HyveError::Contract(_))));
}

#[test]
fn gradients_accumulate_over_reuse_and_calls() {
    let mut tape = Tape::new();
    let x = tape.param(&Tensor::full(&[2], 3.0));
    let y = tape.add(x, x).unwrap();
    let s = tape.sum(y).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).data(), &[2.0, 2.0]);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).data(), &[4.0, 4.0]);
    tape.zero_grad();
    assert_eq!(tape.grad(x).data(), &[0.0, 0.0]);
}

#[test]
fn record_is_topologically_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut tape = Tape::new();
    let x = tape.constant(random(&[1, 2, 4, 4], &mut rng));
    let k = tape.param(&random(&[2, 3, 3, 3], &mut rng));
    let y = tape.conv2d(x, k, 1).unwrap();
    let r = tape.relu(y).unwrap();
    let p = tape.global_avg_pool(r).unwrap();
    let s = tape.sum(p).unwrap();
    for id in 0..tape.len() {
        let v = Var(id);
        assert!(tape.inputs_of(v).iter().all(|i| i.id() < id));
    }
    assert!(tape.requires_grad(s));
    assert!(!tape.requires_grad(x));
}

#[test]
fn broadcast_index_map() {
    assert_eq!(broadcast_map(&[2, 3], &[1, 3]), vec![0, 1, 2, 0, 1, 2]);
    assert_eq!(broadcast_map(&[2, 3], &[2, 1]), vec![0, 0, 0, 1, 1, 1]);
    assert_eq!(broadcast_map(&[2, 2], &[1, 1]), vec![0; 4]);
}

#[test]
fn softplus_is_overflow_safe() {
    assert_eq!(softplus(1000.0), 1000.0);
    assert_eq!(softplus(-1e6), 0.0);
    assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((sigmoid(-800.0)).abs() < 1e-300 && sigmoid(800.0) == 1.0);
}
