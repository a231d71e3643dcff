//! A shallow classifier with a swappable first layer: first layer, ReLU,
//! depthwise-separable blocks with ReLU, global average pooling and a single
//! dense head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::camera::{CameraDescriptor, SPECIM_RANGE};
use crate::error::{HyveError, Result};
use crate::params::{ParamKind, ParamRef};
use crate::tensor::Tensor;
use crate::wroi::{HyveConvConfig, HyveConvLayer, WroiSnapshot, DEFAULT_SHARE_INIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstLayerKind {
    Conv2D,
    DepthwiseSeparable,
    Hyve,
    HyvePlusPlus,
}

impl FirstLayerKind {
    pub fn is_wavelength_aware(self) -> bool {
        matches!(self, FirstLayerKind::Hyve | FirstLayerKind::HyvePlusPlus)
    }

    pub fn label(self) -> &'static str {
        match self {
            FirstLayerKind::Conv2D => "conv2d",
            FirstLayerKind::DepthwiseSeparable => "ds",
            FirstLayerKind::Hyve => "hyve",
            FirstLayerKind::HyvePlusPlus => "hyve++",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub first_layer: FirstLayerKind,
    /// Number of WROIs for the wavelength-aware kinds.
    pub g: usize,
    /// Output width of the first layer followed by one entry per
    /// depthwise-separable block.
    pub widths: Vec<usize>,
    pub kernel_size: usize,
    pub num_classes: usize,
    /// Fixed channel count; required by the fixed-index kinds and rejected by
    /// the wavelength-aware ones.
    pub in_channels: Option<usize>,
    /// Range the initial WROI means are spread over, in nm.
    pub wavelength_range: (f64, f64),
    /// Initial WROI variance in nm²; `None` keeps the default
    /// `(w_max - w_min) / G²`.
    pub initial_variance: Option<f64>,
    /// Adds a per-channel bias to every convolution. Off by default.
    pub conv_bias: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(first_layer: FirstLayerKind, num_classes: usize) -> Self {
        ModelConfig {
            first_layer,
            g: 5,
            widths: vec![25, 30, 50],
            kernel_size: 3,
            num_classes,
            in_channels: None,
            wavelength_range: (SPECIM_RANGE.0, SPECIM_RANGE.1),
            initial_variance: None,
            conv_bias: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(HyveError::Config(format!(
                "widths {:?} must be non-empty and positive",
                self.widths
            )));
        }
        if self.num_classes < 2 {
            return Err(HyveError::Config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(HyveError::Config(format!(
                "kernel size {} must be odd",
                self.kernel_size
            )));
        }
        match (self.first_layer.is_wavelength_aware(), self.in_channels) {
            (true, Some(c)) => Err(HyveError::Config(format!(
                "{:?} takes its channels from the camera wavelengths; a fixed in_channels ({c}) is not allowed",
                self.first_layer
            ))),
            (true, None) if self.g == 0 => Err(HyveError::Config("G must be at least 1".into())),
            (false, None) | (false, Some(0)) => Err(HyveError::Config(format!("{:?} needs a positive in_channels", self.first_layer))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
struct DsBlock {
    spatial: Tensor,
    depth: Tensor,
    bias: Option<Tensor>,
}

#[derive(Clone, Debug)]
enum FirstLayer {
    Conv {
        kernel: Tensor,
        bias: Option<Tensor>,
    },
    Separable(DsBlock),
    Hyve(HyveConvLayer),
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    first: FirstLayer,
    blocks: Vec<DsBlock>,
    head_weight: Tensor,
    head_bias: Tensor,
}

fn uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new(-bound, bound).expect("positive bound");
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

fn ds_block(rng: &mut impl Rng, c_in: usize, c_out: usize, k: usize, bias: bool) -> DsBlock {
    DsBlock {
        spatial: uniform(rng, &[c_in, 1, k, k], k * k),
        depth: uniform(rng, &[c_in, c_out, 1, 1], c_in),
        bias: bias.then(|| Tensor::zeros(&[c_out])),
    }
}

impl DsBlock {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        out.push(ParamRef::new(
            format!("{prefix}.spatial"),
            ParamKind::Weight,
            &self.spatial,
        ));
        out.push(ParamRef::new(
            format!("{prefix}.depth"),
            ParamKind::Weight,
            &self.depth,
        ));
        if let Some(b) = &self.bias {
            out.push(ParamRef::new(format!("{prefix}.bias"), ParamKind::Bias, b));
        }
    }

    fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.spatial);
        out.push(&mut self.depth);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
    }

    fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        padding: usize,
        bound: &mut Vec<Var>,
    ) -> Result<Var> {
        let s = tape.param(&self.spatial);
        let d = tape.param(&self.depth);
        bound.extend([s, d]);
        let y = tape.depthwise_separable_conv(x, s, d, padding)?;
        add_bias(tape, y, self.bias.as_ref(), bound)
    }
}

fn add_bias(tape: &mut Tape, y: Var, bias: Option<&Tensor>, bound: &mut Vec<Var>) -> Result<Var> {
    match bias {
        None => Ok(y),
        Some(b) => {
            let v = tape.param(b);
            bound.push(v);
            let r = tape.reshape(v, &[1, b.numel(), 1, 1])?;
            tape.add_broadcast(y, r)
        }
    }
}

impl Model {
    /// Builds a model with parameters drawn from `cfg.seed`. The dense head
    /// starts at zero, so the initial prediction is uniform over classes.
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let k = cfg.kernel_size;
        let w0 = cfg.widths[0];
        let first = match cfg.first_layer {
            FirstLayerKind::Conv2D => {
                let c_in = cfg.in_channels.expect("validated");
                FirstLayer::Conv {
                    kernel: uniform(&mut rng, &[c_in, w0, k, k], c_in * k * k),
                    bias: cfg.conv_bias.then(|| Tensor::zeros(&[w0])),
                }
            }
            FirstLayerKind::DepthwiseSeparable => FirstLayer::Separable(ds_block(
                &mut rng,
                cfg.in_channels.expect("validated"),
                w0,
                k,
                cfg.conv_bias,
            )),
            FirstLayerKind::Hyve | FirstLayerKind::HyvePlusPlus => {
                let hcfg = HyveConvConfig {
                    g: cfg.g,
                    c_out: w0,
                    kernel: (k, k),
                    padding: k / 2,
                    wavelength_range: cfg.wavelength_range,
                    extended: cfg.first_layer == FirstLayerKind::HyvePlusPlus,
                    initial_variance: cfg.initial_variance,
                    share_init: DEFAULT_SHARE_INIT,
                };
                FirstLayer::Hyve(HyveConvLayer::new(&hcfg, &mut rng)?)
            }
        };
        let blocks = cfg
            .widths
            .windows(2)
            .map(|w| ds_block(&mut rng, w[0], w[1], k, cfg.conv_bias))
            .collect();
        let features = *cfg.widths.last().expect("validated");
        Ok(Model {
            config: cfg.clone(),
            first,
            blocks,
            head_weight: Tensor::zeros(&[features, cfg.num_classes]),
            head_bias: Tensor::zeros(&[cfg.num_classes]),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> FirstLayerKind {
        self.config.first_layer
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn hyve_layer(&self) -> Option<&HyveConvLayer> {
        match &self.first {
            FirstLayer::Hyve(l) => Some(l),
            _ => None,
        }
    }

    fn first_params(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        match &self.first {
            FirstLayer::Conv { kernel, bias } => {
                out.push(ParamRef::new("first.kernel", ParamKind::Weight, kernel));
                if let Some(b) = bias {
                    out.push(ParamRef::new("first.bias", ParamKind::Bias, b));
                }
            }
            FirstLayer::Separable(b) => b.params("first", &mut out),
            FirstLayer::Hyve(l) => out.extend(l.parameters().into_iter().map(|p| ParamRef {
                name: format!("first.{}", p.name),
                ..p
            })),
        }
        out
    }

    /// All trainable tensors in binding order.
    pub fn parameters(&self) -> Vec<ParamRef<'_>> {
        let mut out = self.first_params();
        for (i, b) in self.blocks.iter().enumerate() {
            b.params(&format!("block{}", i + 1), &mut out);
        }
        out.push(ParamRef::new(
            "head.weight",
            ParamKind::Weight,
            &self.head_weight,
        ));
        out.push(ParamRef::new("head.bias", ParamKind::Bias, &self.head_bias));
        out
    }

    /// Mutable tensors in [`Self::parameters`] order. Clears any kernel cache.
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match &mut self.first {
            FirstLayer::Conv { kernel, bias } => {
                out.push(kernel);
                if let Some(b) = bias {
                    out.push(b);
                }
            }
            FirstLayer::Separable(b) => b.params_mut(&mut out),
            FirstLayer::Hyve(l) => out.extend(l.parameters_mut()),
        }
        for b in &mut self.blocks {
            b.params_mut(&mut out);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn count_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.value.numel()).sum()
    }

    pub fn first_layer_parameters(&self) -> usize {
        self.first_params().iter().map(|p| p.value.numel()).sum()
    }

    /// Runs `x` (`N×C×H×W`) through the network, binding every parameter to
    /// `tape`. Returns the `N×classes` logits and the bound parameter
    /// variables in [`Self::parameters`] order.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        wavelengths: Option<&[f64]>,
    ) -> Result<(Var, Vec<Var>)> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 4 {
            return Err(HyveError::Dimension(format!(
                "model input {shape:?} must be N×C×H×W"
            )));
        }
        let pad = self.config.kernel_size / 2;
        let mut bound = Vec::new();
        let mut h = match (&self.first, wavelengths) {
            (FirstLayer::Hyve(layer), Some(l)) => layer.forward(tape, x, l, &mut bound)?,
            (FirstLayer::Hyve(_), None) => {
                return Err(HyveError::Input(format!(
                    "{:?} needs the camera wavelengths",
                    self.config.first_layer
                )));
            }
            (_, Some(_)) => {
                return Err(HyveError::Input(format!(
                    "{:?} indexes channels and takes no wavelengths",
                    self.config.first_layer
                )));
            }
            (first, None) => {
                let c_in = self.config.in_channels.expect("validated");
                if shape[1] != c_in {
                    return Err(HyveError::Input(format!(
                        "model expects {c_in} channels, input has {}",
                        shape[1]
                    )));
                }
                match first {
                    FirstLayer::Conv { kernel, bias } => {
                        let k = tape.param(kernel);
                        bound.push(k);
                        let y = tape.conv2d(x, k, pad)?;
                        add_bias(tape, y, bias.as_ref(), &mut bound)?
                    }
                    FirstLayer::Separable(b) => b.forward(tape, x, pad, &mut bound)?,
                    FirstLayer::Hyve(_) => unreachable!(),
                }
            }
        };
        h = tape.relu(h)?;
        for b in &self.blocks {
            h = b.forward(tape, h, pad, &mut bound)?;
            h = tape.relu(h)?;
        }
        let pooled = tape.global_avg_pool(h)?;
        let w = tape.param(&self.head_weight);
        let b = tape.param(&self.head_bias);
        bound.extend([w, b]);
        let logits = tape.dense(pooled, w, b)?;
        Ok((logits, bound))
    }

    /// Caches the first-layer kernels for `camera`; a no-op for fixed-index kinds.
    pub fn freeze_kernels(&mut self, camera: &CameraDescriptor) -> Result<()> {
        if let FirstLayer::Hyve(l) = &mut self.first {
            l.freeze_kernels(camera)?;
        }
        Ok(())
    }

    pub fn wroi_snapshot(&self, epoch: usize) -> Option<Vec<WroiSnapshot>> {
        self.hyve_layer().map(|l| l.wroi_snapshot(epoch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: FirstLayerKind, c_in: Option<usize>) -> ModelConfig {
        ModelConfig {
            in_channels: c_in,
            widths: vec![25],
            ..ModelConfig::new(kind, 3)
        }
    }

    #[test]
    fn first_layer_counts() {
        let counts: Vec<usize> = [
            cfg(FirstLayerKind::Conv2D, Some(200)),
            cfg(FirstLayerKind::DepthwiseSeparable, Some(200)),
            cfg(FirstLayerKind::Hyve, None),
            cfg(FirstLayerKind::HyvePlusPlus, None),
        ]
        .iter()
        .map(|c| Model::build(c).unwrap().first_layer_parameters())
        .collect();
        assert_eq!(counts, vec![45000, 6800, 1135, 1371]);
    }

    #[test]
    fn bias_is_opt_in() {
        let with = Model::build(&ModelConfig {
            conv_bias: true,
            ..cfg(FirstLayerKind::Conv2D, Some(200))
        })
        .unwrap();
        assert_eq!(with.first_layer_parameters(), 45025);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            Model::build(&cfg(FirstLayerKind::Hyve, Some(224))),
            Err(HyveError::Config(_))
        ));
        assert!(matches!(
            Model::build(&cfg(FirstLayerKind::Conv2D, None)),
            Err(HyveError::Config(_))
        ));
        let mut c = cfg(FirstLayerKind::Hyve, None);
        c.widths.clear();
        assert!(Model::build(&c).is_err());
        c = cfg(FirstLayerKind::Hyve, None);
        c.num_classes = 1;
        assert!(Model::build(&c).is_err());
    }

    #[test]
    fn downstream_counts_do_not_depend_on_first_layer() {
        let mut a = ModelConfig::new(FirstLayerKind::Hyve, 4);
        a.widths = vec![6, 5, 7];
        let mut b = a.clone();
        b.first_layer = FirstLayerKind::Conv2D;
        b.in_channels = Some(11);
        let (ma, mb) = (Model::build(&a).unwrap(), Model::build(&b).unwrap());
        assert_eq!(
            ma.count_parameters() - ma.first_layer_parameters(),
            mb.count_parameters() - mb.first_layer_parameters()
        );
    }

    #[test]
    fn seeded_initialization() {
        let c = ModelConfig {
            seed: 42,
            ..ModelConfig::new(FirstLayerKind::HyvePlusPlus, 3)
        };
        let (a, b) = (Model::build(&c).unwrap(), Model::build(&c).unwrap());
        for (p, q) in a.parameters().iter().zip(b.parameters()) {
            assert_eq!(p.value, q.value);
        }
    }

    #[test]
    fn forward_shapes_and_guards() {
        let mut c = ModelConfig::new(FirstLayerKind::HyvePlusPlus, 3);
        c.widths = vec![4, 5];
        let model = Model::build(&c).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[2, 7, 5, 5], 0.3));
        let l: Vec<f64> = (0..7).map(|i| 450.0 + 60.0 * i as f64).collect();
        let (logits, bound) = model.forward(&mut tape, x, Some(&l)).unwrap();
        assert_eq!(tape.value(logits).shape(), &[2, 3]);
        assert_eq!(bound.len(), model.parameters().len());
        assert!(matches!(
            model.forward(&mut tape, x, None),
            Err(HyveError::Input(_))
        ));

        let conv = Model::build(&ModelConfig {
            first_layer: FirstLayerKind::Conv2D,
            in_channels: Some(6),
            ..c
        })
        .unwrap();
        assert!(matches!(
            conv.forward(&mut tape, x, None),
            Err(HyveError::Input(_))
        ));
        assert!(matches!(
            conv.forward(&mut tape, x, Some(&l)),
            Err(HyveError::Input(_))
        ));
    }
}
