#![allow(dead_code)]

use hyve::autodiff::{Tape, Var};
use hyve::camera::CameraDescriptor;
use hyve::nets::{FirstLayerKind, Model, ModelConfig};
use hyve::wroi::{range_impact_on_tape, DEFAULT_VARIANCE_FLOOR};
use hyve::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// |a − fd| / (|a| + |fd| + 1e-8)
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-8)
}

/// Compares reverse-mode gradients of `f` against central differences for
/// every entry of every input. Returns the worst relative error.
pub fn gradcheck<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t)).collect();
        let out = f(&mut tape, &vars).expect("forward");
        tape.value(out).data()[0]
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &vars).expect("forward");
    tape.backward(out).expect("backward");

    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = tape.grad(*var).clone();
        for j in 0..inputs[i].numel() {
            let x = inputs[i].data()[j];
            work[i].data_mut()[j] = x + FD_STEP;
            let up = eval(&work);
            work[i].data_mut()[j] = x - FD_STEP;
            let down = eval(&work);
            work[i].data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic.data()[j], numeric));
        }
    }
    worst
}

/// Reduces any tensor to a scalar through fixed random weights so that every
/// output entry gets a distinct, non-zero adjoint.
pub fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let n = tape.value(x).numel();
    let mut r = rng(seed);
    let w = tape.constant(random(&[n, 1], 0.5, 1.5, &mut r));
    let flat = tape.reshape(x, &[1, n])?;
    let y = tape.matmul(flat, w)?;
    tape.sum(y)
}

/// Worst relative gradient error of every tape primitive, by name.
pub fn primitive_gradchecks() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut r = rng(1);
    let a = random(&[3, 4], -2.0, 2.0, &mut r);
    let b = random(&[3, 4], -2.0, 2.0, &mut r);
    out.push((
        "add",
        gradcheck(&[a.clone(), b], |t, v| {
            let y = t.add(v[0], v[1])?;
            weighted_sum(t, y, 2)
        }),
    ));
    let row = random(&[1, 4], -1.0, 1.0, &mut r);
    out.push((
        "add_broadcast",
        gradcheck(&[a.clone(), row], |t, v| {
            let y = t.add_broadcast(v[0], v[1])?;
            weighted_sum(t, y, 3)
        }),
    ));
    out.push((
        "scale_by",
        gradcheck(&[a.clone(), Tensor::scalar(0.7)], |t, v| {
            let y = t.scale_by(v[0], v[1])?;
            weighted_sum(t, y, 4)
        }),
    ));
    out.push((
        "scale+reshape+sum",
        gradcheck(std::slice::from_ref(&a), |t, v| {
            let y = t.scale(v[0], -1.3)?;
            let y = t.reshape(y, &[4, 3])?;
            let y = t.relu(y)?;
            t.sum(y)
        }),
    ));
    out.push((
        "softplus",
        gradcheck(std::slice::from_ref(&a), |t, v| {
            let y = t.softplus(v[0])?;
            weighted_sum(t, y, 5)
        }),
    ));
    // keep entries away from the kink
    let away = Tensor::from_fn(&[3, 4], |i| {
        if i % 2 == 0 {
            0.3 + i as f64 * 0.1
        } else {
            -0.4 - i as f64 * 0.1
        }
    });
    out.push((
        "relu",
        gradcheck(&[away], |t, v| {
            let y = t.relu(v[0])?;
            weighted_sum(t, y, 6)
        }),
    ));
    let m = random(&[4, 2], -1.0, 1.0, &mut r);
    out.push((
        "matmul",
        gradcheck(&[a, m], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted_sum(t, y, 7)
        }),
    ));

    let wavelengths = [400.0, 455.0, 512.5, 600.0, 710.0];
    let means = Tensor::new(vec![3], vec![430.0, 560.0, 690.0]).unwrap();
    let vars = Tensor::new(vec![3], vec![900.0, 2500.0, 1600.0]).unwrap();
    out.push((
        "gaussian",
        gradcheck(&[means, vars], |t, v| {
            let y = t.gaussian(&wavelengths, v[0], v[1])?;
            let y = t.scale(y, 100.0)?;
            weighted_sum(t, y, 8)
        }),
    ));
    let wavelengths = [400.0, 480.0, 560.0, 640.0, 720.0, 800.0];
    let means = Tensor::new(vec![2], vec![470.0, 690.0]).unwrap();
    let raw = Tensor::new(vec![2], vec![3000.0, 1800.0]).unwrap();
    out.push((
        "range_impact",
        gradcheck(&[means, raw], |t, v| {
            let ri = range_impact_on_tape(t, &wavelengths, v[0], v[1], DEFAULT_VARIANCE_FLOOR)?;
            let y = t.scale(ri, 100.0)?;
            weighted_sum(t, y, 9)
        }),
    ));

    let mut r = rng(10);
    let x = random(&[2, 3, 5, 4], -1.0, 1.0, &mut r);
    let k = random(&[3, 2, 3, 3], -1.0, 1.0, &mut r);
    out.push((
        "conv2d",
        gradcheck(&[x.clone(), k], |t, v| {
            let y = t.conv2d(v[0], v[1], 1)?;
            weighted_sum(t, y, 11)
        }),
    ));
    let dk = random(&[3, 1, 3, 1], -1.0, 1.0, &mut r);
    out.push((
        "depthwise_conv2d",
        gradcheck(&[x.clone(), dk.clone()], |t, v| {
            let y = t.depthwise_conv2d(v[0], v[1], 1)?;
            weighted_sum(t, y, 12)
        }),
    ));
    let mix = random(&[3, 4, 1, 1], -1.0, 1.0, &mut r);
    out.push((
        "depthwise_separable_conv",
        gradcheck(&[x, dk, mix], |t, v| {
            let y = t.depthwise_separable_conv(v[0], v[1], v[2], 1)?;
            weighted_sum(t, y, 13)
        }),
    ));

    let mut r = rng(20);
    let x = random(&[3, 4, 2, 3], -1.0, 1.0, &mut r);
    let w = random(&[4, 3], -1.0, 1.0, &mut r);
    let b = random(&[3], -1.0, 1.0, &mut r);
    out.push((
        "global_avg_pool+dense+softmax_cross_entropy",
        gradcheck(&[x, w, b], |t, v| {
            let p = t.global_avg_pool(v[0])?;
            let logits = t.dense(p, v[1], v[2])?;
            t.softmax_cross_entropy(logits, &[2, 0, 1])
        }),
    ));
    out
}

/// Worst relative gradient error over every parameter (M, V_raw, prototypes,
/// α, β, blocks and head) of a HyveConv++ network on a 6-channel 8×8 input.
pub fn tiny_network_gradcheck() -> f64 {
    // Narrow WROIs over a 150 nm window and inputs of order 10 keep every
    // gradient well above the roundoff floor of the central difference.
    let camera = CameraDescriptor::linspace("tiny", 500.0, 650.0, 6).unwrap();
    let mut cfg = ModelConfig::new(FirstLayerKind::HyvePlusPlus, 3);
    cfg.g = 3;
    cfg.widths = vec![4, 3];
    cfg.wavelength_range = (500.0, 650.0);
    cfg.initial_variance = Some(30.0 * 30.0);
    cfg.seed = 5;
    let mut model = Model::build(&cfg).unwrap();
    let mut r = rng(30);
    // a zero head would leave every upstream gradient at zero
    let n = model.parameters_mut().len();
    for p in model.parameters_mut().into_iter().skip(n - 2) {
        *p = random(p.shape(), -1.0, 1.0, &mut r);
    }
    let x = random(&[2, 6, 8, 8], 10.0, 100.0, &mut r);
    let labels = [0, 2];

    let loss_of = |m: &Model| -> f64 {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let (logits, _) = m
            .forward(&mut tape, xv, Some(camera.wavelengths()))
            .unwrap();
        let l = tape.softmax_cross_entropy(logits, &labels).unwrap();
        tape.value(l).data()[0]
    };
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (logits, bound) = model
        .forward(&mut tape, xv, Some(camera.wavelengths()))
        .unwrap();
    let loss = tape.softmax_cross_entropy(logits, &labels).unwrap();
    tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = bound.iter().map(|&v| tape.grad(v).clone()).collect();

    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for (i, grad) in analytic.iter().enumerate() {
        for j in 0..grad.numel() {
            let x0 = probe.parameters_mut()[i].data()[j];
            probe.parameters_mut()[i].data_mut()[j] = x0 + FD_STEP;
            let up = loss_of(&probe);
            probe.parameters_mut()[i].data_mut()[j] = x0 - FD_STEP;
            let down = loss_of(&probe);
            probe.parameters_mut()[i].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grad.data()[j], numeric));
        }
    }
    worst
}

/// `K[c,o,x,y] = Σ_g N(λ_c; μ_g, σ²_g) · (KP[g,o,x,y] + α·KP_cout[o,x,y] + β·KP_conv[x,y])`
/// as plain nested loops; the extension terms drop out when `ext` is `None`.
pub fn synthesis_oracle(
    wavelengths: &[f64],
    means: &[f64],
    variances: &[f64],
    kp: &Tensor,
    ext: Option<(f64, &Tensor, f64, &Tensor)>,
) -> Tensor {
    let s = kp.shape();
    let (g, c_out, kx, ky) = (s[0], s[1], s[2], s[3]);
    let c_in = wavelengths.len();
    let mut k = Tensor::zeros(&[c_in, c_out, kx, ky]);
    for c in 0..c_in {
        for o in 0..c_out {
            for x in 0..kx {
                for y in 0..ky {
                    let mut acc = 0.0;
                    for gi in 0..g {
                        let d = wavelengths[c] - means[gi];
                        let v = variances[gi];
                        let ri =
                            (-(d * d) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                        let mut w = kp.get(&[gi, o, x, y]);
                        if let Some((alpha, cout, beta, conv)) = ext {
                            w += alpha * cout.get(&[0, o, x, y]) + beta * conv.get(&[0, 0, x, y]);
                        }
                        acc += ri * w;
                    }
                    k.set(&[c, o, x, y], acc);
                }
            }
        }
    }
    k
}
