//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is the computation record for one forward pass. Every primitive
//! appends a node whose inputs were appended earlier, so the node list is in
//! topological order and [`Tape::backward`] is a single reverse sweep.
//!
//! Convolutions are cross-correlations (no kernel flip) with stride 1 and zero
//! padding, and carry no bias. Everything is `f64`.
//!
//! The tape is single-threaded. Independent tapes may run on separate threads.

mod conv;

use crate::error::{HyveError, Result};
use crate::tensor::Tensor;
use crate::wroi::gaussian_eval;
use conv::Geometry;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    /// Second operand broadcast over the first operand's shape.
    AddBroadcast(Var, Var),
    /// Tensor times a single-element variable.
    ScaleBy(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Reshape(Var),
    Sum(Var),
    Relu(Var),
    Softplus(Var),
    Gaussian {
        wavelengths: Vec<f64>,
        means: Var,
        variances: Var,
    },
    Conv2d {
        input: Var,
        kernel: Var,
        geom: Geometry,
    },
    Depthwise {
        input: Var,
        kernel: Var,
        geom: Geometry,
    },
    GlobalAvgPool(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::AddBroadcast(a, b) | Op::ScaleBy(a, b) | Op::MatMul(a, b) => {
                vec![a, b]
            }
            Op::Scale(a, _)
            | Op::Reshape(a)
            | Op::Sum(a)
            | Op::Relu(a)
            | Op::Softplus(a)
            | Op::GlobalAvgPool(a) => {
                vec![a]
            }
            Op::Gaussian {
                means, variances, ..
            } => vec![means, variances],
            Op::Conv2d { input, kernel, .. } | Op::Depthwise { input, kernel, .. } => {
                vec![input, kernel]
            }
            Op::SoftmaxCrossEntropy { logits, .. } => vec![logits],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::AddBroadcast(..) => "add_broadcast",
            Op::ScaleBy(..) => "scale_by",
            Op::Scale(..) => "scale",
            Op::MatMul(..) => "matmul",
            Op::Reshape(..) => "reshape",
            Op::Sum(..) => "sum",
            Op::Relu(..) => "relu",
            Op::Softplus(..) => "softplus",
            Op::Gaussian { .. } => "gaussian",
            Op::Conv2d { .. } => "conv2d",
            Op::Depthwise { .. } => "depthwise_conv2d",
            Op::GlobalAvgPool(..) => "global_avg_pool",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }
}

struct Node {
    value: Tensor,
    grad: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Computation record for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let grad = Tensor::zeros(value.shape());
        self.nodes.push(Node {
            value,
            grad,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf holding a copy of `value`.
    pub fn param(&mut self, value: &Tensor) -> Var {
        self.leaf(value.clone(), true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].grad
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Ids of the nodes `v` was computed from.
    pub fn inputs_of(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad.data_mut().fill(0.0);
        }
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.all_finite() {
            return Err(HyveError::Numeric(format!(
                "{} produced a non-finite value",
                op.name()
            )));
        }
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        let grad = Tensor::zeros(value.shape());
        self.nodes.push(Node {
            value,
            grad,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(HyveError::Dimension(format!(
                "add: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Add(a, b))
    }

    /// `a + b` where `b` has the same rank as `a` and every dimension of `b`
    /// is either 1 or equal to `a`'s.
    pub fn add_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != sb.len() || sa.iter().zip(sb).any(|(&x, &y)| y != 1 && y != x) {
            return Err(HyveError::Dimension(format!(
                "add_broadcast: {sb:?} does not broadcast to {sa:?}"
            )));
        }
        let map = broadcast_map(sa, sb);
        let bv = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&map)
            .map(|(x, &j)| x + bv[j])
            .collect();
        let value = Tensor::new(sa.to_vec(), data)?;
        self.push(value, Op::AddBroadcast(a, b))
    }

    /// Multiplies `a` by the single-element variable `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let factor = self.value(s).item().ok_or_else(|| {
            HyveError::Dimension(format!("scale_by: factor has shape {:?}", self.shape(s)))
        })?;
        let data = self.value(a).data().iter().map(|x| factor * x).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::ScaleBy(a, s))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let data = self.value(a).data().iter().map(|x| factor * x).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Scale(a, factor))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(HyveError::Dimension(format!("matmul: {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        self.push(value, Op::Reshape(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Relu(a))
    }

    /// Elementwise `ln(1 + e^x)`, switching to `x` above 30.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let data = self.value(a).data().iter().map(|&x| softplus(x)).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Softplus(a))
    }

    /// `C×G` matrix of Gaussian densities of each wavelength under each
    /// (mean, variance) pair. `means` and `variances` have shape `[G]`.
    pub fn gaussian(&mut self, wavelengths: &[f64], means: Var, variances: Var) -> Result<Var> {
        let g = self.value(means).numel();
        if self.shape(means) != [g] || self.shape(variances) != [g] {
            return Err(HyveError::Dimension(format!(
                "gaussian: means {:?} and variances {:?} must both be [G]",
                self.shape(means),
                self.shape(variances)
            )));
        }
        if wavelengths.is_empty() {
            return Err(HyveError::Input("gaussian: no wavelengths".into()));
        }
        let (mu, var) = (self.value(means).data(), self.value(variances).data());
        let mut out = Vec::with_capacity(wavelengths.len() * g);
        for &x in wavelengths {
            for j in 0..g {
                out.push(gaussian_eval(x, mu[j], var[j])?);
            }
        }
        let value = Tensor::new(vec![wavelengths.len(), g], out)?;
        self.push(
            value,
            Op::Gaussian {
                wavelengths: wavelengths.to_vec(),
                means,
                variances,
            },
        )
    }

    fn conv_geometry(
        &self,
        input: Var,
        kernel: Var,
        padding: usize,
        depthwise: bool,
    ) -> Result<Geometry> {
        let (si, sk) = (self.shape(input), self.shape(kernel));
        if si.len() != 4 || sk.len() != 4 {
            return Err(HyveError::Dimension(format!(
                "conv: input {si:?} and kernel {sk:?} must be rank 4"
            )));
        }
        if sk[0] != si[1] {
            return Err(HyveError::Dimension(format!(
                "conv: kernel expects {} input channels, input has {}",
                sk[0], si[1]
            )));
        }
        if depthwise && sk[1] != 1 {
            return Err(HyveError::Dimension(format!(
                "depthwise conv: kernel {sk:?} must be C×1×Kx×Ky"
            )));
        }
        if sk[2] % 2 == 0 || sk[3] % 2 == 0 {
            return Err(HyveError::Dimension(format!(
                "conv: kernel size {}x{} must be odd",
                sk[2], sk[3]
            )));
        }
        let geom = Geometry {
            n: si[0],
            c_in: si[1],
            c_out: if depthwise { si[1] } else { sk[1] },
            h: si[2],
            w: si[3],
            kx: sk[2],
            ky: sk[3],
            pad: padding,
        };
        if si[2] + 2 * padding < sk[2] || si[3] + 2 * padding < sk[3] {
            return Err(HyveError::Dimension(format!(
                "conv: {}x{} kernel does not fit a {}x{} input with padding {padding}",
                sk[2], sk[3], si[2], si[3]
            )));
        }
        Ok(geom)
    }

    /// Cross-correlation of `N×C_in×H×W` input with `C_in×C_out×K_x×K_y`
    /// kernels.
    pub fn conv2d(&mut self, input: Var, kernel: Var, padding: usize) -> Result<Var> {
        let geom = self.conv_geometry(input, kernel, padding, false)?;
        let out = conv::conv2d_forward(self.value(input).data(), self.value(kernel).data(), &geom);
        let value = Tensor::new(vec![geom.n, geom.c_out, geom.out_h(), geom.out_w()], out)?;
        self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                geom,
            },
        )
    }

    /// Per-channel cross-correlation with `C×1×K_x×K_y` kernels.
    pub fn depthwise_conv2d(&mut self, input: Var, kernel: Var, padding: usize) -> Result<Var> {
        let geom = self.conv_geometry(input, kernel, padding, true)?;
        let out =
            conv::depthwise_forward(self.value(input).data(), self.value(kernel).data(), &geom);
        let value = Tensor::new(vec![geom.n, geom.c_out, geom.out_h(), geom.out_w()], out)?;
        self.push(
            value,
            Op::Depthwise {
                input,
                kernel,
                geom,
            },
        )
    }

    /// Depthwise spatial convolution followed by 1×1 channel mixing.
    pub fn depthwise_separable_conv(
        &mut self,
        input: Var,
        spatial: Var,
        depth: Var,
        padding: usize,
    ) -> Result<Var> {
        let sd = self.shape(depth);
        if sd.len() != 4 || sd[2] != 1 || sd[3] != 1 {
            return Err(HyveError::Dimension(format!(
                "depthwise separable: mixing kernel {sd:?} must be C_in×C_out×1×1"
            )));
        }
        let spatial_out = self.depthwise_conv2d(input, spatial, padding)?;
        self.conv2d(spatial_out, depth, 0)
    }

    pub fn global_avg_pool(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 {
            return Err(HyveError::Dimension(format!(
                "global_avg_pool: expected N×C×H×W, got {s:?}"
            )));
        }
        let hw = s[2] * s[3];
        let data = self
            .value(a)
            .data()
            .chunks(hw)
            .map(|plane| plane.iter().sum::<f64>() / hw as f64)
            .collect();
        self.push(Tensor::new(vec![s[0], s[1]], data)?, Op::GlobalAvgPool(a))
    }

    /// Fully connected layer: `x·W + b` with `x: N×F`, `W: F×O`, `b: [O]`.
    pub fn dense(&mut self, x: Var, weights: Var, bias: Var) -> Result<Var> {
        let o = self.shape(weights).get(1).copied().unwrap_or(0);
        if self.shape(bias) != [o] {
            return Err(HyveError::Dimension(format!(
                "dense: bias {:?} must be [{o}]",
                self.shape(bias)
            )));
        }
        let xw = self.matmul(x, weights)?;
        let b = self.reshape(bias, &[1, o])?;
        self.add_broadcast(xw, b)
    }

    /// Mean softmax cross-entropy of `N×O` logits against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(HyveError::Dimension(format!(
                "softmax_cross_entropy: logits {s:?} vs {} labels",
                labels.len()
            )));
        }
        let (n, o) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= o) {
            return Err(HyveError::Input(format!(
                "label {bad} out of range for {o} classes"
            )));
        }
        let mut probs = Vec::with_capacity(n * o);
        let mut loss = 0.0;
        for (row, &label) in self.value(logits).data().chunks(o).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            let log_z = max + z.ln();
            loss += log_z - row[label];
            probs.extend(row.iter().map(|&v| (v - log_z).exp()));
        }
        let value = Tensor::scalar(loss / n as f64);
        self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Accumulates d(loss)/d(node) into every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(HyveError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adjoint: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adjoint[loss.0] = Some(Tensor::ones(self.shape(loss)));
        for i in (0..=loss.0).rev() {
            let Some(g) = adjoint[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            for (input, contribution) in self.vjp(i, &g)? {
                match &mut adjoint[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            self.nodes[i].grad.add_assign(&g);
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `i` for each input requiring a gradient.
    fn vjp(&self, i: usize, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let like = |v: Var, data: Vec<f64>| Tensor::new(self.shape(v).to_vec(), data);
        let gd = g.data();
        let mut out = Vec::new();
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                for v in [a, b] {
                    if needs(v) {
                        out.push((v, g.clone()));
                    }
                }
            }
            &Op::AddBroadcast(a, b) => {
                if needs(a) {
                    out.push((a, g.clone()));
                }
                if needs(b) {
                    let map = broadcast_map(self.shape(a), self.shape(b));
                    let mut gb = vec![0.0; self.value(b).numel()];
                    for (&j, &x) in map.iter().zip(gd) {
                        gb[j] += x;
                    }
                    out.push((b, like(b, gb)?));
                }
            }
            &Op::ScaleBy(a, s) => {
                let factor = self.value(s).data()[0];
                if needs(a) {
                    out.push((a, like(a, gd.iter().map(|x| factor * x).collect())?));
                }
                if needs(s) {
                    let dot = gd
                        .iter()
                        .zip(self.value(a).data())
                        .map(|(x, y)| x * y)
                        .sum();
                    out.push((s, like(s, vec![dot])?));
                }
            }
            &Op::Scale(a, factor) => {
                if needs(a) {
                    out.push((a, like(a, gd.iter().map(|x| factor * x).collect())?));
                }
            }
            &Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(a), self.shape(b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if needs(a) {
                    let bt = transpose(self.value(b).data(), k, n);
                    out.push((a, like(a, matmul_raw(gd, &bt, m, n, k))?));
                }
                if needs(b) {
                    let at = transpose(self.value(a).data(), m, k);
                    out.push((b, like(b, matmul_raw(&at, gd, k, m, n))?));
                }
            }
            &Op::Reshape(a) => {
                if needs(a) {
                    out.push((a, like(a, gd.to_vec())?));
                }
            }
            &Op::Sum(a) => {
                if needs(a) {
                    out.push((a, Tensor::full(self.shape(a), gd[0])));
                }
            }
            &Op::Relu(a) => {
                if needs(a) {
                    let x = self.value(a).data();
                    out.push((
                        a,
                        like(
                            a,
                            gd.iter()
                                .zip(x)
                                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                                .collect(),
                        )?,
                    ));
                }
            }
            &Op::Softplus(a) => {
                if needs(a) {
                    let x = self.value(a).data();
                    out.push((
                        a,
                        like(a, gd.iter().zip(x).map(|(g, &x)| g * sigmoid(x)).collect())?,
                    ));
                }
            }
            Op::Gaussian {
                wavelengths,
                means,
                variances,
            } => {
                let (means, variances) = (*means, *variances);
                let (mu, var) = (self.value(means).data(), self.value(variances).data());
                let density = self.nodes[i].value.data();
                let gsz = mu.len();
                let mut g_mu = vec![0.0; gsz];
                let mut g_var = vec![0.0; gsz];
                for (c, &x) in wavelengths.iter().enumerate() {
                    for j in 0..gsz {
                        let idx = c * gsz + j;
                        let (d, v) = (x - mu[j], var[j]);
                        let weighted = gd[idx] * density[idx];
                        g_mu[j] += weighted * d / v;
                        g_var[j] += weighted * (d * d / (2.0 * v * v) - 0.5 / v);
                    }
                }
                if needs(means) {
                    out.push((means, like(means, g_mu)?));
                }
                if needs(variances) {
                    out.push((variances, like(variances, g_var)?));
                }
            }
            &Op::Conv2d {
                input,
                kernel,
                geom,
            } => {
                if needs(input) {
                    out.push((
                        input,
                        like(
                            input,
                            conv::conv2d_grad_input(gd, self.value(kernel).data(), &geom),
                        )?,
                    ));
                }
                if needs(kernel) {
                    out.push((
                        kernel,
                        like(
                            kernel,
                            conv::conv2d_grad_kernel(gd, self.value(input).data(), &geom),
                        )?,
                    ));
                }
            }
            &Op::Depthwise {
                input,
                kernel,
                geom,
            } => {
                if needs(input) {
                    out.push((
                        input,
                        like(
                            input,
                            conv::depthwise_grad_input(gd, self.value(kernel).data(), &geom),
                        )?,
                    ));
                }
                if needs(kernel) {
                    out.push((
                        kernel,
                        like(
                            kernel,
                            conv::depthwise_grad_kernel(gd, self.value(input).data(), &geom),
                        )?,
                    ));
                }
            }
            &Op::GlobalAvgPool(a) => {
                if needs(a) {
                    let s = self.shape(a);
                    let hw = s[2] * s[3];
                    let data = gd
                        .iter()
                        .flat_map(|&x| std::iter::repeat_n(x / hw as f64, hw))
                        .collect();
                    out.push((a, like(a, data)?));
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let logits = *logits;
                if needs(logits) {
                    let o = self.shape(logits)[1];
                    let scale = gd[0] / labels.len() as f64;
                    let mut data: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                    for (row, &label) in labels.iter().enumerate() {
                        data[row * o + label] -= scale;
                    }
                    out.push((logits, like(logits, data)?));
                }
            }
        }
        Ok(out)
    }
}

/// Flat index into `b` for every flat position of a tensor shaped `a`.
fn broadcast_map(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; b.len()];
    let mut acc = 1;
    for d in (0..b.len()).rev() {
        strides[d] = if b[d] == 1 { 0 } else { acc };
        acc *= b[d];
    }
    let total: usize = a.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; a.len()];
    for _ in 0..total {
        map.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for d in (0..a.len()).rev() {
            idx[d] += 1;
            if idx[d] < a[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    map
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            for (o, y) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += x * y;
            }
        }
    }
    out
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests;
