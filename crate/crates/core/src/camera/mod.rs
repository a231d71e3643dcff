//! Camera descriptors, hyperspectral cubes, synthetic scenes and the two
//! preprocessing baselines used by fixed-channel models.

mod cube_io;
mod scene;

pub use cube_io::{read_cube, read_labels, write_cube, write_labels, CUBE_FORMAT, CUBE_VERSION};
pub use scene::{
    generate_scene, sample_camera, ClassSpectrum, NarrowBand, Nuisance, SceneConfig, SpectralScene,
    SpectrumBump,
};

use serde::{Deserialize, Serialize};

use crate::error::{HyveError, Result};

/// Wavelengths of the Specim FX10 used for the default camera, in nm.
pub const SPECIM_RANGE: (f64, f64, usize) = (397.66, 1003.81, 224);
/// Wavelengths of the Corning microHSI 410 analog, in nm.
pub const CORNING_RANGE: (f64, f64, usize) = (408.03, 901.26, 249);

/// Ordered channel → wavelength assignment of a camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraDescriptor {
    name: String,
    wavelengths: Vec<f64>,
    /// Index of the first synthetic placeholder channel added by zero padding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    placeholder_from: Option<usize>,
}

impl CameraDescriptor {
    pub fn new(name: impl Into<String>, wavelengths: Vec<f64>) -> Result<Self> {
        validate_wavelengths(&wavelengths)
            .map_err(|(i, msg)| HyveError::Input(format!("wavelength {i}: {msg}")))?;
        Ok(CameraDescriptor {
            name: name.into(),
            wavelengths,
            placeholder_from: None,
        })
    }

    pub(crate) fn with_placeholders(
        name: String,
        wavelengths: Vec<f64>,
        placeholder_from: Option<usize>,
    ) -> Result<Self> {
        let mut cam = Self::new(name, wavelengths)?;
        if let Some(p) = placeholder_from {
            if p > cam.wavelengths.len() {
                return Err(HyveError::Input(format!(
                    "placeholder index {p} beyond {} channels",
                    cam.wavelengths.len()
                )));
            }
            cam.placeholder_from = Some(p);
        }
        Ok(cam)
    }

    /// `channels` evenly spaced wavelengths from `w_min` to `w_max` inclusive.
    pub fn linspace(
        name: impl Into<String>,
        w_min: f64,
        w_max: f64,
        channels: usize,
    ) -> Result<Self> {
        if channels < 2 {
            return Err(HyveError::Input(format!(
                "a linspace camera needs at least 2 channels, got {channels}"
            )));
        }
        if !(w_min.is_finite() && w_max.is_finite() && w_max > w_min) {
            return Err(HyveError::Input(format!(
                "degenerate wavelength range [{w_min}, {w_max}]"
            )));
        }
        let step = (w_max - w_min) / (channels - 1) as f64;
        let wavelengths = (0..channels)
            .map(|i| {
                if i == channels - 1 {
                    w_max
                } else {
                    w_min + i as f64 * step
                }
            })
            .collect();
        Self::new(name, wavelengths)
    }

    pub fn specim() -> Self {
        let (lo, hi, n) = SPECIM_RANGE;
        Self::linspace("specim", lo, hi, n).expect("valid built-in camera")
    }

    pub fn corning() -> Self {
        let (lo, hi, n) = CORNING_RANGE;
        Self::linspace("corning", lo, hi, n).expect("valid built-in camera")
    }

    /// Keeps the channels whose index is `offset` modulo `stride`.
    pub fn subset(&self, stride: usize, offset: usize, name: impl Into<String>) -> Result<Self> {
        if stride == 0 || offset >= stride {
            return Err(HyveError::Input(format!(
                "subset needs stride >= 1 and offset < stride, got {stride}/{offset}"
            )));
        }
        let wavelengths: Vec<f64> = self
            .real_wavelengths()
            .iter()
            .skip(offset)
            .step_by(stride)
            .copied()
            .collect();
        if wavelengths.is_empty() {
            return Err(HyveError::Input(format!(
                "subset {stride}/{offset} of {} channels is empty",
                self.channels()
            )));
        }
        Self::new(name, wavelengths)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn channels(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn placeholder_from(&self) -> Option<usize> {
        self.placeholder_from
    }

    /// Wavelengths excluding zero-padding placeholders.
    pub fn real_wavelengths(&self) -> &[f64] {
        &self.wavelengths[..self.placeholder_from.unwrap_or(self.wavelengths.len())]
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.wavelengths[0],
            self.wavelengths[self.wavelengths.len() - 1],
        )
    }
}

/// Checks the descriptor invariants, returning the offending index.
pub(crate) fn validate_wavelengths(
    wavelengths: &[f64],
) -> std::result::Result<(), (usize, String)> {
    if wavelengths.is_empty() {
        return Err((0, "a camera needs at least one channel".into()));
    }
    for (i, &w) in wavelengths.iter().enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err((i, format!("{w} is not a finite positive wavelength")));
        }
        if i > 0 && w <= wavelengths[i - 1] {
            return Err((
                i,
                format!(
                    "{w} does not exceed the previous wavelength {}",
                    wavelengths[i - 1]
                ),
            ));
        }
    }
    Ok(())
}

/// An `H × W × C` recording with its camera and optional per-pixel labels.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    data: Vec<f64>,
    camera: CameraDescriptor,
    labels: Option<Vec<u32>>,
}

impl HyperCube {
    pub fn new(
        height: usize,
        width: usize,
        data: Vec<f64>,
        camera: CameraDescriptor,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(HyveError::Dimension(format!(
                "cube size {height}x{width} is empty"
            )));
        }
        let expected = height * width * camera.channels();
        if data.len() != expected {
            return Err(HyveError::Dimension(format!(
                "cube {height}x{width}x{} needs {expected} values, got {}",
                camera.channels(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(HyveError::Numeric(format!("cube value {i} is not finite")));
        }
        if let Some(l) = &labels {
            if l.len() != height * width {
                return Err(HyveError::Dimension(format!(
                    "{} labels for {} pixels",
                    l.len(),
                    height * width
                )));
            }
        }
        Ok(HyperCube {
            height,
            width,
            data,
            camera,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.camera.channels()
    }

    pub fn camera(&self) -> &CameraDescriptor {
        &self.camera
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn pixel(&self, h: usize, w: usize) -> &[f64] {
        let c = self.channels();
        let start = (h * self.width + w) * c;
        &self.data[start..start + c]
    }

    pub fn label(&self, h: usize, w: usize) -> Option<u32> {
        self.labels.as_ref().map(|l| l[h * self.width + w])
    }

    pub fn with_labels(mut self, labels: Option<Vec<u32>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.height * self.width {
                return Err(HyveError::Dimension(format!(
                    "{} labels for {} pixels",
                    l.len(),
                    self.height * self.width
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    fn map_pixels(
        &self,
        camera: CameraDescriptor,
        mut f: impl FnMut(&[f64], &mut Vec<f64>),
    ) -> HyperCube {
        let mut data = Vec::with_capacity(self.height * self.width * camera.channels());
        for p in self.data.chunks_exact(self.channels()) {
            f(p, &mut data);
        }
        debug_assert_eq!(data.len(), self.height * self.width * camera.channels());
        HyperCube {
            height: self.height,
            width: self.width,
            data,
            camera,
            labels: self.labels.clone(),
        }
    }
}

/// Piecewise-linear resampling onto `target` wavelengths. Targets outside
/// the source range take the nearest edge value.
pub fn linear_interpolate(cube: &HyperCube, target: &CameraDescriptor) -> HyperCube {
    let src = cube.camera.real_wavelengths();
    // For each target: (left index, right weight); a weight of 0 means "take left".
    let plan: Vec<(usize, f64)> = target
        .wavelengths()
        .iter()
        .map(|&t| {
            if t <= src[0] {
                (0, 0.0)
            } else if t >= src[src.len() - 1] {
                (src.len() - 1, 0.0)
            } else {
                let right = src.partition_point(|&s| s <= t);
                let left = right - 1;
                (left, (t - src[left]) / (src[right] - src[left]))
            }
        })
        .collect();
    cube.map_pixels(target.clone(), |p, out| {
        out.extend(plan.iter().map(|&(i, w)| {
            if w == 0.0 {
                p[i]
            } else {
                p[i] + w * (p[i + 1] - p[i])
            }
        }));
    })
}

/// Appends zero channels until the cube has `target_channels`. The descriptor
/// gains placeholder wavelengths continuing past the last real one.
pub fn zero_pad_channels(cube: &HyperCube, target_channels: usize) -> Result<HyperCube> {
    let c = cube.channels();
    if target_channels < c {
        return Err(HyveError::Input(format!(
            "cannot pad {c} channels down to {target_channels}"
        )));
    }
    if target_channels == c {
        return Ok(cube.clone());
    }
    let w = cube.camera.wavelengths();
    let step = if c > 1 {
        (w[c - 1] - w[0]) / (c - 1) as f64
    } else {
        1.0
    };
    let mut wavelengths = w.to_vec();
    wavelengths.extend((1..=target_channels - c).map(|k| w[c - 1] + k as f64 * step));
    let placeholder = cube.camera.placeholder_from.unwrap_or(c);
    let camera = CameraDescriptor::with_placeholders(
        format!("{}+pad{target_channels}", cube.camera.name),
        wavelengths,
        Some(placeholder),
    )?;
    Ok(cube.map_pixels(camera, |p, out| {
        out.extend_from_slice(p);
        out.resize(out.len() + target_channels - c, 0.0);
    }))
}

/// Per-pixel standard normal variate: each pixel's real channels are shifted
/// to zero mean and scaled to unit (population) standard deviation.
/// Placeholder channels stay zero. A flat pixel is only centered.
pub fn standard_normal_variate(cube: &HyperCube) -> HyperCube {
    let real = cube.camera.placeholder_from.unwrap_or(cube.channels());
    cube.map_pixels(cube.camera.clone(), |p, out| {
        let (head, tail) = p.split_at(real);
        let mean = head.iter().sum::<f64>() / real as f64;
        let var = head.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / real as f64;
        let scale = if var.sqrt() > 1e-12 {
            1.0 / var.sqrt()
        } else {
            1.0
        };
        out.extend(head.iter().map(|x| (x - mean) * scale));
        out.extend_from_slice(tail);
    })
}

/// Per-pixel intensity normalization applied before alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    Snv,
}

/// How a fixed-channel model aligns cubes from different cameras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alignment {
    None,
    Interpolate { target: CameraDescriptor },
    ZeroPad { channels: usize },
}

impl Alignment {
    pub fn apply(&self, cube: &HyperCube) -> Result<HyperCube> {
        match self {
            Alignment::None => Ok(cube.clone()),
            Alignment::Interpolate { target } => Ok(linear_interpolate(cube, target)),
            Alignment::ZeroPad { channels } => zero_pad_channels(cube, *channels),
        }
    }

    /// Channel count after alignment, if fixed.
    pub fn output_channels(&self) -> Option<usize> {
        match self {
            Alignment::None => None,
            Alignment::Interpolate { target } => Some(target.channels()),
            Alignment::ZeroPad { channels } => Some(*channels),
        }
    }
}

/// Normalization followed by alignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub normalization: Normalization,
    pub alignment: Alignment,
}

impl Preprocessing {
    pub fn new(normalization: Normalization, alignment: Alignment) -> Self {
        Preprocessing {
            normalization,
            alignment,
        }
    }

    /// Leaves cubes untouched.
    pub fn identity() -> Self {
        Preprocessing::new(Normalization::None, Alignment::None)
    }

    pub fn apply(&self, cube: &HyperCube) -> Result<HyperCube> {
        match self.normalization {
            Normalization::None => self.alignment.apply(cube),
            Normalization::Snv => self.alignment.apply(&standard_normal_variate(cube)),
        }
    }

    pub fn output_channels(&self) -> Option<usize> {
        self.alignment.output_channels()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from_fn(
        camera: CameraDescriptor,
        h: usize,
        w: usize,
        f: impl Fn(f64) -> f64,
    ) -> HyperCube {
        let mut data = Vec::new();
        for _ in 0..h * w {
            data.extend(camera.wavelengths().iter().map(|&l| f(l)));
        }
        HyperCube::new(h, w, data, camera, None).unwrap()
    }

    #[test]
    fn linspace_endpoints() {
        let s = CameraDescriptor::specim();
        assert_eq!(s.channels(), 224);
        assert_eq!(s.wavelengths()[0], 397.66);
        assert_eq!(s.wavelengths()[223], 1003.81);
        let c = CameraDescriptor::corning();
        assert_eq!((c.channels(), c.range()), (249, (408.03, 901.26)));
        let two = CameraDescriptor::linspace("two", 500.0, 600.0, 2).unwrap();
        assert_eq!(two.wavelengths(), &[500.0, 600.0]);
        assert!(CameraDescriptor::linspace("bad", 500.0, 500.0, 4).is_err());
        assert!(CameraDescriptor::linspace("bad", 500.0, 600.0, 1).is_err());
    }

    #[test]
    fn descriptor_rejects_bad_wavelengths() {
        assert!(CameraDescriptor::new("x", vec![]).is_err());
        assert!(CameraDescriptor::new("x", vec![500.0, 500.0]).is_err());
        assert!(CameraDescriptor::new("x", vec![500.0, f64::NAN]).is_err());
        assert!(CameraDescriptor::new("x", vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn subsets() {
        let s = CameraDescriptor::specim();
        let a = s.subset(2, 0, "a").unwrap();
        let b = s.subset(3, 1, "b").unwrap();
        assert_eq!(a.channels(), 112);
        assert_eq!(b.channels(), 75);
        assert!(b.channels() < a.channels());
        assert_eq!(b.wavelengths()[0], s.wavelengths()[1]);
        assert_eq!(
            s.subset(1, 0, "same").unwrap().wavelengths(),
            s.wavelengths()
        );
        assert!(s.subset(2, 2, "bad").is_err());
        let tiny = CameraDescriptor::new("t", vec![500.0]).unwrap();
        assert!(tiny.subset(3, 1, "empty").is_err());
    }

    #[test]
    fn interpolation_midpoint_and_clamp() {
        let src = CameraDescriptor::new("src", vec![400.0, 500.0]).unwrap();
        let cube = HyperCube::new(1, 1, vec![1.0, 3.0], src, None).unwrap();
        let target = CameraDescriptor::new("t", vec![350.0, 450.0, 500.0, 550.0]).unwrap();
        let out = linear_interpolate(&cube, &target);
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn interpolation_identity() {
        let cam = CameraDescriptor::linspace("c", 400.0, 900.0, 37).unwrap();
        let cube = cube_from_fn(cam.clone(), 2, 3, |l| (l / 97.0).sin());
        let out = linear_interpolate(&cube, &cam);
        for (a, b) in out.data().iter().zip(cube.data()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_padding() {
        let cube = cube_from_fn(CameraDescriptor::specim(), 2, 2, |l| l / 1000.0);
        let padded = zero_pad_channels(&cube, 249).unwrap();
        assert_eq!(padded.channels(), 249);
        assert_eq!(padded.camera().placeholder_from(), Some(224));
        assert_eq!(
            padded.camera().real_wavelengths(),
            cube.camera().wavelengths()
        );
        assert!(padded.camera().wavelengths()[224] > 1003.81);
        for h in 0..2 {
            for w in 0..2 {
                assert_eq!(&padded.pixel(h, w)[..224], cube.pixel(h, w));
                assert!(padded.pixel(h, w)[224..].iter().all(|&v| v == 0.0));
            }
        }
        assert_eq!(zero_pad_channels(&cube, 224).unwrap(), cube);
        assert!(zero_pad_channels(&cube, 100).is_err());
    }

    #[test]
    fn cube_validation() {
        let cam = CameraDescriptor::linspace("c", 400.0, 500.0, 3).unwrap();
        assert!(HyperCube::new(1, 1, vec![0.0; 2], cam.clone(), None).is_err());
        assert!(HyperCube::new(1, 1, vec![0.0, f64::INFINITY, 0.0], cam.clone(), None).is_err());
        assert!(HyperCube::new(1, 2, vec![0.0; 6], cam, Some(vec![1])).is_err());
    }
}
