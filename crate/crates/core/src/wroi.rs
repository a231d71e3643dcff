//! Learnable wavelength ranges of interest (WROIs) and wavelength-aware
//! kernel synthesis.
//!
//! A layer owns `G` Gaussians over wavelength and `G` kernel prototypes.
//! For a camera with channel wavelengths `λ`, the range-impact matrix
//! `RI[c][g]` is the density of Gaussian `g` at `λ[c]`, and the per-channel
//! convolution kernels are `K[c] = Σ_g RI[c][g] · KP[g]`. The extended variant
//! adds `α · KP_cout` (shared by all WROIs) and `β · KP_conv` (shared by all
//! WROIs and output channels) to every prototype before the contraction.
//!
//! Notes on the density:
//! - The exponent is the usual squared form `-(x-μ)²/(2σ²)`.
//! - The `1/√(2πσ²)` normalization is kept and `RI` is never row-normalized,
//!   so a channel far from every mean receives an almost-zero kernel.
//! - Wavelengths stay in raw nanometres. Means therefore live on a scale of
//!   hundreds while variances start near `(w_max - w_min)/G²`; the trainer
//!   gives these parameters their own learning rate to compensate.
//! - Means are never clamped to the initial range.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::camera::CameraDescriptor;
use crate::error::{HyveError, Result};
use crate::params::{ParamKind, ParamRef};
use crate::tensor::Tensor;

/// Added after softplus so a variance can never reach zero.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

/// Initial value of both α and β.
pub const DEFAULT_SHARE_INIT: f64 = 0.1;

/// Normal density `N(x; mean, variance)`.
pub fn gaussian_eval(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(HyveError::Domain(format!(
            "gaussian variance must be positive, got {variance}"
        )));
    }
    let d = x - mean;
    Ok((-(d * d) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt())
}

/// `ln(1 + e^raw) + floor`; above `raw = 30` the log term is replaced by `raw`.
pub fn softplus_variance(raw: f64, floor: f64) -> f64 {
    crate::autodiff::softplus(raw) + floor
}

/// The raw parameter for which [`softplus_variance`] returns `variance`.
pub fn raw_variance_for(variance: f64, floor: f64) -> Result<f64> {
    let y = variance - floor;
    if !(y > 0.0) || !y.is_finite() {
        return Err(HyveError::Input(format!(
            "variance {variance} must exceed the floor {floor}"
        )));
    }
    Ok(if y > 30.0 { y } else { y.exp_m1().ln() })
}

/// Initial variance `(1/G)² · (w_max - w_min)`.
///
/// The units are nm rather than nm²; callers who want a different width pass
/// an explicit variance to [`GaussianWroiSet::init_with_variance`].
pub fn default_initial_variance(g: usize, w_min: f64, w_max: f64) -> f64 {
    (w_max - w_min) / (g * g) as f64
}

/// `G` Gaussians over wavelength, stored as means and raw variances.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianWroiSet {
    means: Tensor,
    raw_variances: Tensor,
    floor: f64,
}

impl GaussianWroiSet {
    /// Means evenly spaced over `[w_min, w_max]` (both ends included; the
    /// midpoint when `g == 1`) and the default initial variance.
    pub fn init(g: usize, w_min: f64, w_max: f64) -> Result<Self> {
        Self::init_with_variance(g, w_min, w_max, None)
    }

    pub fn init_with_variance(
        g: usize,
        w_min: f64,
        w_max: f64,
        variance: Option<f64>,
    ) -> Result<Self> {
        if g == 0 {
            return Err(HyveError::Input("need at least one WROI".into()));
        }
        if !(w_min.is_finite() && w_max.is_finite() && w_max > w_min) {
            return Err(HyveError::Input(format!(
                "degenerate wavelength range [{w_min}, {w_max}]"
            )));
        }
        let means: Vec<f64> = if g == 1 {
            vec![0.5 * (w_min + w_max)]
        } else {
            let step = (w_max - w_min) / (g - 1) as f64;
            (0..g)
                .map(|i| {
                    if i == g - 1 {
                        w_max
                    } else {
                        w_min + i as f64 * step
                    }
                })
                .collect()
        };
        let variance = variance.unwrap_or_else(|| default_initial_variance(g, w_min, w_max));
        let raw = raw_variance_for(variance, DEFAULT_VARIANCE_FLOOR)?;
        Ok(GaussianWroiSet {
            means: Tensor::new(vec![g], means)?,
            raw_variances: Tensor::full(&[g], raw),
            floor: DEFAULT_VARIANCE_FLOOR,
        })
    }

    pub fn from_raw(means: Tensor, raw_variances: Tensor, floor: f64) -> Result<Self> {
        let g = means.numel();
        if means.shape() != [g] || raw_variances.shape() != [g] {
            return Err(HyveError::Dimension(format!(
                "means {:?} and raw variances {:?} must both be [G]",
                means.shape(),
                raw_variances.shape()
            )));
        }
        if !(floor > 0.0) {
            return Err(HyveError::Input(format!(
                "variance floor must be positive, got {floor}"
            )));
        }
        Ok(GaussianWroiSet {
            means,
            raw_variances,
            floor,
        })
    }

    pub fn len(&self) -> usize {
        self.means.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn means(&self) -> &[f64] {
        self.means.data()
    }

    pub fn raw_variances(&self) -> &[f64] {
        self.raw_variances.data()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Effective variances `softplus(raw) + floor`, in nm².
    pub fn variances(&self) -> Vec<f64> {
        self.raw_variances
            .data()
            .iter()
            .map(|&v| softplus_variance(v, self.floor))
            .collect()
    }
}

/// Peak value `1/√(2πσ²)` of a WROI density.
pub fn peak_density(variance: f64) -> Result<f64> {
    gaussian_eval(0.0, 0.0, variance)
}

/// Overlap coefficient `∫ min(N(λ; μ₁, σ₁²), N(λ; μ₂, σ₂²)) dλ`, from 0 for
/// disjoint densities to 1 for identical ones. Composite Simpson over
/// ±10 standard deviations of both densities.
pub fn density_overlap(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> Result<f64> {
    const INTERVALS: usize = 20_000;
    let (sa, sb) = (var_a.sqrt(), var_b.sqrt());
    let lo = (mean_a - 10.0 * sa).min(mean_b - 10.0 * sb);
    let hi = (mean_a + 10.0 * sa).max(mean_b + 10.0 * sb);
    let h = (hi - lo) / INTERVALS as f64;
    let mut acc = 0.0;
    for i in 0..=INTERVALS {
        let l = lo + i as f64 * h;
        let f = gaussian_eval(l, mean_a, var_a)?.min(gaussian_eval(l, mean_b, var_b)?);
        let w = if i == 0 || i == INTERVALS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f;
    }
    Ok((acc * h / 3.0).min(1.0))
}

/// `C_in × G` matrix of Gaussian densities at a camera's channel wavelengths.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeImpactMatrix {
    pub values: Tensor,
    pub wavelengths: Vec<f64>,
}

pub fn range_impact(wavelengths: &[f64], wrois: &GaussianWroiSet) -> Result<RangeImpactMatrix> {
    let mut tape = Tape::new();
    let means = tape.constant(wrois.means.clone());
    let raw = tape.constant(wrois.raw_variances.clone());
    let ri = range_impact_on_tape(&mut tape, wavelengths, means, raw, wrois.floor)?;
    Ok(RangeImpactMatrix {
        values: tape.value(ri).clone(),
        wavelengths: wavelengths.to_vec(),
    })
}

/// Differentiable range-impact matrix from mean and raw-variance variables.
pub fn range_impact_on_tape(
    tape: &mut Tape,
    wavelengths: &[f64],
    means: Var,
    raw_variances: Var,
    floor: f64,
) -> Result<Var> {
    if let Some(bad) = wavelengths.iter().find(|w| !w.is_finite()) {
        return Err(HyveError::Input(format!("non-finite wavelength {bad}")));
    }
    let softplus = tape.softplus(raw_variances)?;
    let g = tape.value(raw_variances).numel();
    let floor = tape.constant(Tensor::full(&[g], floor));
    let variances = tape.add(softplus, floor)?;
    tape.gaussian(wavelengths, means, variances)
}

/// The shared prototypes of the extended layer and their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeExtension {
    /// `[1]`
    pub alpha: Tensor,
    /// `1 × C_out × K_x × K_y`
    pub per_output: Tensor,
    /// `[1]`
    pub beta: Tensor,
    /// `1 × 1 × K_x × K_y`
    pub per_layer: Tensor,
}

/// Kernel prototypes `G × C_out × K_x × K_y` and the optional extension.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPrototypeBundle {
    pub prototypes: Tensor,
    pub extension: Option<PrototypeExtension>,
}

impl KernelPrototypeBundle {
    pub fn new(prototypes: Tensor, extension: Option<PrototypeExtension>) -> Result<Self> {
        let s = prototypes.shape();
        if s.len() != 4 {
            return Err(HyveError::Dimension(format!(
                "prototypes {s:?} must be G×C_out×Kx×Ky"
            )));
        }
        if let Some(ext) = &extension {
            let (c_out, kx, ky) = (s[1], s[2], s[3]);
            if ext.alpha.shape() != [1] || ext.beta.shape() != [1] {
                return Err(HyveError::Dimension(
                    "alpha and beta must have shape [1]".into(),
                ));
            }
            if ext.per_output.shape() != [1, c_out, kx, ky]
                || ext.per_layer.shape() != [1, 1, kx, ky]
            {
                return Err(HyveError::Dimension(format!(
                    "shared prototypes {:?} / {:?} do not match prototypes {s:?}",
                    ext.per_output.shape(),
                    ext.per_layer.shape()
                )));
            }
        }
        Ok(KernelPrototypeBundle {
            prototypes,
            extension,
        })
    }

    pub fn g(&self) -> usize {
        self.prototypes.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.prototypes.shape()[1]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.prototypes.shape()[2], self.prototypes.shape()[3])
    }

    pub fn is_extended(&self) -> bool {
        self.extension.is_some()
    }

    fn bind(&self, tape: &mut Tape, constant: bool) -> BundleVars {
        let mut put = |t: &Tensor| {
            if constant {
                tape.constant(t.clone())
            } else {
                tape.param(t)
            }
        };
        BundleVars {
            prototypes: put(&self.prototypes),
            extension: self.extension.as_ref().map(|e| {
                [
                    put(&e.alpha),
                    put(&e.per_output),
                    put(&e.beta),
                    put(&e.per_layer),
                ]
            }),
        }
    }
}

struct BundleVars {
    prototypes: Var,
    /// alpha, per-output prototype, beta, per-layer prototype
    extension: Option<[Var; 4]>,
}

impl BundleVars {
    fn effective(&self, tape: &mut Tape) -> Result<Var> {
        match self.extension {
            None => Ok(self.prototypes),
            Some([alpha, per_output, beta, per_layer]) => {
                let a = tape.scale_by(per_output, alpha)?;
                let b = tape.scale_by(per_layer, beta)?;
                let with_a = tape.add_broadcast(self.prototypes, a)?;
                tape.add_broadcast(with_a, b)
            }
        }
    }
}

/// `KP + α·KP_cout + β·KP_conv`, broadcasting the shared prototypes over
/// WROIs (and output channels for `KP_conv`).
pub fn extend_prototypes(bundle: &KernelPrototypeBundle) -> Result<Tensor> {
    if !bundle.is_extended() {
        return Err(HyveError::Contract(
            "extend_prototypes needs an extended bundle".into(),
        ));
    }
    let mut tape = Tape::new();
    let vars = bundle.bind(&mut tape, true);
    let out = vars.effective(&mut tape)?;
    Ok(tape.value(out).clone())
}

/// Differentiable `K = RI · KP_eff`, shaped `C_in × C_out × K_x × K_y`.
fn synthesize_on_tape(tape: &mut Tape, ri: Var, effective: Var) -> Result<Var> {
    let (c_in, g) = (tape.value(ri).shape()[0], tape.value(ri).shape()[1]);
    let s = tape.value(effective).shape().to_vec();
    if s[0] != g {
        return Err(HyveError::Dimension(format!(
            "range-impact matrix has {g} columns but there are {} prototypes",
            s[0]
        )));
    }
    let flat = tape.reshape(effective, &[g, s[1] * s[2] * s[3]])?;
    let k = tape.matmul(ri, flat)?;
    tape.reshape(k, &[c_in, s[1], s[2], s[3]])
}

/// Per-channel kernels `K[c,o,x,y] = Σ_g RI[c,g] · KP_eff[g,o,x,y]`.
pub fn synthesize_kernels(
    ri: &RangeImpactMatrix,
    bundle: &KernelPrototypeBundle,
) -> Result<Tensor> {
    if ri.values.rank() != 2 {
        return Err(HyveError::Dimension(format!(
            "range-impact matrix {:?} must be C_in×G",
            ri.values.shape()
        )));
    }
    let mut tape = Tape::new();
    let ri_var = tape.constant(ri.values.clone());
    let vars = bundle.bind(&mut tape, true);
    let effective = vars.effective(&mut tape)?;
    let k = synthesize_on_tape(&mut tape, ri_var, effective)?;
    Ok(tape.value(k).clone())
}

/// Construction parameters for [`HyveConvLayer`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyveConvConfig {
    pub g: usize,
    pub c_out: usize,
    pub kernel: (usize, usize),
    pub padding: usize,
    /// Range the initial means are spread over, in nm.
    pub wavelength_range: (f64, f64),
    pub extended: bool,
    /// Overrides the default initial variance (nm²).
    pub initial_variance: Option<f64>,
    pub share_init: f64,
}

impl HyveConvConfig {
    pub fn new(g: usize, c_out: usize, wavelength_range: (f64, f64), extended: bool) -> Self {
        HyveConvConfig {
            g,
            c_out,
            kernel: (3, 3),
            padding: 1,
            wavelength_range,
            extended,
            initial_variance: None,
            share_init: DEFAULT_SHARE_INIT,
        }
    }
}

/// One row of a WROI trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WroiSnapshot {
    pub epoch: usize,
    pub wroi: usize,
    pub mean_nm: f64,
    pub variance_nm2: f64,
}

fn cache_key(wavelengths: &[f64]) -> Vec<u64> {
    wavelengths.iter().map(|w| w.to_bits()).collect()
}

/// Wavelength-aware convolution layer with a per-camera kernel cache.
///
/// The cache is keyed by the exact bit pattern of the wavelength vector, so
/// two cameras with identical wavelengths share an entry. Any mutable access
/// to the parameters clears it.
#[derive(Debug)]
pub struct HyveConvLayer {
    wrois: GaussianWroiSet,
    bundle: KernelPrototypeBundle,
    padding: usize,
    cache: HashMap<Vec<u64>, Tensor>,
    syntheses: AtomicUsize,
}

impl Clone for HyveConvLayer {
    fn clone(&self) -> Self {
        HyveConvLayer {
            wrois: self.wrois.clone(),
            bundle: self.bundle.clone(),
            padding: self.padding,
            cache: self.cache.clone(),
            syntheses: AtomicUsize::new(self.syntheses.load(Ordering::Relaxed)),
        }
    }
}

impl HyveConvLayer {
    pub fn new(cfg: &HyveConvConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.c_out == 0 {
            return Err(HyveError::Config("output channels must be positive".into()));
        }
        let (kx, ky) = cfg.kernel;
        let (w_min, w_max) = cfg.wavelength_range;
        let wrois = GaussianWroiSet::init_with_variance(cfg.g, w_min, w_max, cfg.initial_variance)?;
        let bound = (6.0 / (cfg.g * kx * ky) as f64).sqrt();
        let dist = Uniform::new(-bound, bound).expect("positive bound");
        let mut sample = |shape: &[usize]| Tensor::from_fn(shape, |_| dist.sample(rng));
        let prototypes = sample(&[cfg.g, cfg.c_out, kx, ky]);
        let extension = cfg.extended.then(|| PrototypeExtension {
            alpha: Tensor::scalar(cfg.share_init),
            per_output: sample(&[1, cfg.c_out, kx, ky]),
            beta: Tensor::scalar(cfg.share_init),
            per_layer: sample(&[1, 1, kx, ky]),
        });
        Self::from_parts(
            wrois,
            KernelPrototypeBundle::new(prototypes, extension)?,
            cfg.padding,
        )
    }

    pub fn from_parts(
        wrois: GaussianWroiSet,
        bundle: KernelPrototypeBundle,
        padding: usize,
    ) -> Result<Self> {
        if wrois.len() != bundle.g() {
            return Err(HyveError::Dimension(format!(
                "{} WROIs but {} prototypes",
                wrois.len(),
                bundle.g()
            )));
        }
        let (kx, ky) = bundle.kernel_size();
        if kx % 2 == 0 || ky % 2 == 0 {
            return Err(HyveError::Config(format!(
                "kernel size {kx}x{ky} must be odd"
            )));
        }
        Ok(HyveConvLayer {
            wrois,
            bundle,
            padding,
            cache: HashMap::new(),
            syntheses: AtomicUsize::new(0),
        })
    }

    pub fn wrois(&self) -> &GaussianWroiSet {
        &self.wrois
    }

    pub fn prototypes(&self) -> &KernelPrototypeBundle {
        &self.bundle
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn c_out(&self) -> usize {
        self.bundle.c_out()
    }

    pub fn is_extended(&self) -> bool {
        self.bundle.is_extended()
    }

    /// Parameters in binding order: means, raw variances, prototypes, then
    /// α, per-output prototype, β, per-layer prototype when extended.
    pub fn parameters(&self) -> Vec<ParamRef<'_>> {
        let mut out = vec![
            ParamRef::new("means", ParamKind::WroiMean, &self.wrois.means),
            ParamRef::new(
                "raw_variances",
                ParamKind::WroiVariance,
                &self.wrois.raw_variances,
            ),
            ParamRef::new("prototypes", ParamKind::Weight, &self.bundle.prototypes),
        ];
        if let Some(e) = &self.bundle.extension {
            out.push(ParamRef::new("alpha", ParamKind::ShareWeight, &e.alpha));
            out.push(ParamRef::new(
                "per_output_prototype",
                ParamKind::Weight,
                &e.per_output,
            ));
            out.push(ParamRef::new("beta", ParamKind::ShareWeight, &e.beta));
            out.push(ParamRef::new(
                "per_layer_prototype",
                ParamKind::Weight,
                &e.per_layer,
            ));
        }
        out
    }

    /// Mutable parameters in [`Self::parameters`] order. Clears the kernel cache.
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.cache.clear();
        let mut out = vec![
            &mut self.wrois.means,
            &mut self.wrois.raw_variances,
            &mut self.bundle.prototypes,
        ];
        if let Some(e) = &mut self.bundle.extension {
            out.extend([
                &mut e.alpha,
                &mut e.per_output,
                &mut e.beta,
                &mut e.per_layer,
            ]);
        }
        out
    }

    /// `G·C_out·K_x·K_y + 2G`, plus `C_out·K_x·K_y + K_x·K_y + 2` when extended.
    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.numel()).sum()
    }

    /// Synthesizes kernels for `wavelengths` without consulting the cache.
    pub fn synthesize_for(&self, wavelengths: &[f64]) -> Result<Tensor> {
        let ri = range_impact(wavelengths, &self.wrois)?;
        self.syntheses.fetch_add(1, Ordering::Relaxed);
        synthesize_kernels(&ri, &self.bundle)
    }

    /// Stores kernels for this camera; later forwards with the same
    /// wavelengths reuse them.
    pub fn freeze_kernels(&mut self, camera: &CameraDescriptor) -> Result<&Tensor> {
        self.freeze_wavelengths(camera.wavelengths())
    }

    pub fn freeze_wavelengths(&mut self, wavelengths: &[f64]) -> Result<&Tensor> {
        let key = cache_key(wavelengths);
        if !self.cache.contains_key(&key) {
            let kernels = self.synthesize_for(wavelengths)?;
            self.cache.insert(key.clone(), kernels);
        }
        Ok(&self.cache[&key])
    }

    pub fn cached_kernels(&self, wavelengths: &[f64]) -> Option<&Tensor> {
        self.cache.get(&cache_key(wavelengths))
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    /// Kernel syntheses performed outside a training tape (cache fills and
    /// explicit [`Self::synthesize_for`] calls).
    pub fn synthesis_count(&self) -> usize {
        self.syntheses.load(Ordering::Relaxed)
    }

    /// Binds parameters to `tape` (appending their variables to `bound` in
    /// [`Self::parameters`] order) and convolves `input` (`N×C_in×H×W`).
    pub fn forward(
        &self,
        tape: &mut Tape,
        input: Var,
        wavelengths: &[f64],
        bound: &mut Vec<Var>,
    ) -> Result<Var> {
        let channels = tape.value(input).shape().get(1).copied().unwrap_or(0);
        if channels != wavelengths.len() {
            return Err(HyveError::Input(format!(
                "input has {channels} channels but the camera lists {} wavelengths",
                wavelengths.len()
            )));
        }
        let means = tape.param(&self.wrois.means);
        let raw = tape.param(&self.wrois.raw_variances);
        let vars = self.bundle.bind(tape, false);
        bound.extend([means, raw, vars.prototypes]);
        if let Some(ext) = vars.extension {
            bound.extend(ext);
        }
        let kernels = match self.cached_kernels(wavelengths) {
            Some(k) => tape.constant(k.clone()),
            None => {
                let ri = range_impact_on_tape(tape, wavelengths, means, raw, self.wrois.floor)?;
                let effective = vars.effective(tape)?;
                synthesize_on_tape(tape, ri, effective)?
            }
        };
        tape.conv2d(input, kernels, self.padding)
    }

    pub fn wroi_snapshot(&self, epoch: usize) -> Vec<WroiSnapshot> {
        self.wrois
            .means()
            .iter()
            .zip(self.wrois.variances())
            .enumerate()
            .map(|(wroi, (&mean_nm, variance_nm2))| WroiSnapshot {
                epoch,
                wroi,
                mean_nm,
                variance_nm2,
            })
            .collect()
    }
}
