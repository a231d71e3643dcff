use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CameraDescriptor, HyperCube};
use crate::error::{HyveError, Result};

/// One smooth component of a class spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SpectrumBump {
    Gaussian {
        center: f64,
        sd: f64,
        amplitude: f64,
    },
    /// `amplitude · (1 + cos(π (λ - center) / half_width)) / 2` inside
    /// `center ± half_width`, zero outside.
    RaisedCosine {
        center: f64,
        half_width: f64,
        amplitude: f64,
    },
}

impl SpectrumBump {
    pub fn eval(&self, l: f64) -> f64 {
        match *self {
            SpectrumBump::Gaussian {
                center,
                sd,
                amplitude,
            } => {
                let z = (l - center) / sd;
                amplitude * (-0.5 * z * z).exp()
            }
            SpectrumBump::RaisedCosine {
                center,
                half_width,
                amplitude,
            } => {
                let d = l - center;
                if d.abs() >= half_width {
                    0.0
                } else {
                    0.5 * amplitude * (1.0 + (PI * d / half_width).cos())
                }
            }
        }
    }

    /// Upper bound on `|d/dλ eval|`.
    pub fn slope_bound(&self) -> f64 {
        match *self {
            SpectrumBump::Gaussian { sd, amplitude, .. } => {
                amplitude.abs() / (sd * std::f64::consts::E.sqrt())
            }
            SpectrumBump::RaisedCosine {
                half_width,
                amplitude,
                ..
            } => amplitude.abs() * PI / (2.0 * half_width),
        }
    }
}

/// A continuous reflectance spectrum: `intercept + slope·(λ - pivot) + Σ bumps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub intercept: f64,
    /// Reflectance change per nm.
    pub slope: f64,
    pub pivot: f64,
    pub bumps: Vec<SpectrumBump>,
}

impl ClassSpectrum {
    pub fn eval(&self, l: f64) -> f64 {
        self.intercept
            + self.slope * (l - self.pivot)
            + self.bumps.iter().map(|b| b.eval(l)).sum::<f64>()
    }

    /// Upper bound on the absolute derivative over all wavelengths.
    pub fn derivative_bound(&self) -> f64 {
        self.slope.abs()
            + self
                .bumps
                .iter()
                .map(SpectrumBump::slope_bound)
                .sum::<f64>()
    }
}

/// Per-region variation applied on top of the class spectrum:
/// `gain · S(λ) + offset + tilt · (λ - mid) / half_range + shape(λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub gain: f64,
    pub offset: f64,
    pub tilt: f64,
    /// A broad Gaussian bump shared by every class in the region.
    pub shape: SpectrumBump,
}

impl Nuisance {
    pub const IDENTITY: Nuisance = Nuisance {
        gain: 1.0,
        offset: 0.0,
        tilt: 0.0,
        shape: SpectrumBump::Gaussian {
            center: 0.0,
            sd: 1.0,
            amplitude: 0.0,
        },
    };
}

/// The narrow feature separating class pairs that otherwise share a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowBand {
    /// Full support of the raised-cosine bump, in nm.
    pub width_nm: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub range: (f64, f64),
    /// Side of the square same-class regions; nuisances are drawn per region.
    pub tile: usize,
    /// Number of classes built as the first class plus one narrow band each.
    /// The remaining classes get independent broad spectra.
    pub narrow_classes: usize,
    pub narrow_band: NarrowBand,
    /// Fixed band centres in nm, one per narrow class; empty draws them at
    /// random from the middle 60 % of the range.
    #[serde(default)]
    pub narrow_centers: Vec<f64>,
    /// Half-widths of the uniform nuisance draws (gain around 1, the others around 0).
    pub gain_spread: f64,
    pub offset_spread: f64,
    pub tilt_spread: f64,
    /// Half-width of the amplitude draw of the broad shape nuisance. Its
    /// centre is uniform over the range and its sd 10–25 % of the span.
    pub shape_spread: f64,
    pub seed: u64,
}

impl SceneConfig {
    pub fn new(classes: usize, height: usize, width: usize, range: (f64, f64), seed: u64) -> Self {
        SceneConfig {
            classes,
            height,
            width,
            range,
            tile: 8,
            narrow_classes: 1,
            narrow_band: NarrowBand {
                width_nm: 24.0,
                amplitude: 0.06,
            },
            narrow_centers: Vec::new(),
            gain_spread: 0.15,
            offset_spread: 0.05,
            tilt_spread: 0.0,
            shape_spread: 0.0,
            seed,
        }
    }
}

/// Per-pixel spectra described by a class label and the nuisance of the
/// pixel's region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralScene {
    config: SceneConfig,
    spectra: Vec<ClassSpectrum>,
    tiles_x: usize,
    tile_labels: Vec<u32>,
    tile_nuisance: Vec<Nuisance>,
}

/// Scene with the default [`SceneConfig`] for the given size and seed.
pub fn generate_scene(
    classes: usize,
    height: usize,
    width: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<SpectralScene> {
    SpectralScene::generate(&SceneConfig::new(classes, height, width, range, seed))
}

fn draw_base(rng: &mut impl Rng, range: (f64, f64)) -> ClassSpectrum {
    let (lo, hi) = range;
    let span = hi - lo;
    let count = rng.random_range(2..=4);
    let bumps = (0..count)
        .map(|_| SpectrumBump::Gaussian {
            center: rng.random_range(lo..hi),
            sd: rng.random_range(0.06..0.2) * span,
            amplitude: rng.random_range(0.05..0.2),
        })
        .collect();
    ClassSpectrum {
        intercept: rng.random_range(0.2..0.35),
        slope: rng.random_range(-0.1..0.1) / span,
        pivot: 0.5 * (lo + hi),
        bumps,
    }
}

impl SpectralScene {
    pub fn generate(cfg: &SceneConfig) -> Result<Self> {
        if cfg.classes < 2 {
            return Err(HyveError::Input(format!(
                "a scene needs at least 2 classes, got {}",
                cfg.classes
            )));
        }
        let (lo, hi) = cfg.range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo && lo > 0.0) {
            return Err(HyveError::Input(format!(
                "invalid scene range [{lo}, {hi}]"
            )));
        }
        if cfg.narrow_classes >= cfg.classes {
            return Err(HyveError::Input(format!(
                "{} narrow-band classes leave no base class among {}",
                cfg.narrow_classes, cfg.classes
            )));
        }
        let half = 0.5 * cfg.narrow_band.width_nm;
        if !(half > 0.0) || cfg.narrow_band.width_nm > 0.5 * (hi - lo) {
            return Err(HyveError::Input(format!(
                "narrow band width {} nm does not fit the range",
                cfg.narrow_band.width_nm
            )));
        }
        if !cfg.narrow_centers.is_empty() {
            if cfg.narrow_centers.len() != cfg.narrow_classes {
                return Err(HyveError::Input(format!(
                    "{} band centres for {} narrow classes",
                    cfg.narrow_centers.len(),
                    cfg.narrow_classes
                )));
            }
            if let Some(c) = cfg
                .narrow_centers
                .iter()
                .find(|&&c| !(c - half >= lo && c + half <= hi))
            {
                return Err(HyveError::Input(format!(
                    "band centre {c} nm puts the band outside [{lo}, {hi}]"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let base = draw_base(&mut rng, cfg.range);
        let mut spectra = vec![base.clone()];
        // Random bands sit in the middle 60% of the range, kept apart from each other.
        let mut centers: Vec<f64> = Vec::new();
        for k in 0..cfg.narrow_classes {
            let center = if let Some(&c) = cfg.narrow_centers.get(k) {
                c
            } else {
                loop {
                    let c = rng.random_range(lo + 0.2 * (hi - lo)..hi - 0.2 * (hi - lo));
                    if centers.iter().all(|&o| (o - c).abs() > 4.0 * half) {
                        break c;
                    }
                }
            };
            centers.push(center);
            let mut s = base.clone();
            s.bumps.push(SpectrumBump::RaisedCosine {
                center,
                half_width: half,
                amplitude: cfg.narrow_band.amplitude,
            });
            spectra.push(s);
        }
        while spectra.len() < cfg.classes {
            spectra.push(draw_base(&mut rng, cfg.range));
        }
        let mut scene = SpectralScene {
            config: cfg.clone(),
            spectra,
            tiles_x: 0,
            tile_labels: Vec::new(),
            tile_nuisance: Vec::new(),
        };
        scene.layout(&mut rng)?;
        Ok(scene)
    }

    fn layout(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let cfg = &self.config;
        if cfg.height == 0 || cfg.width == 0 || cfg.tile == 0 {
            return Err(HyveError::Input(format!(
                "scene size {}x{} with tile {} is empty",
                cfg.height, cfg.width, cfg.tile
            )));
        }
        let tiles_x = cfg.width.div_ceil(cfg.tile);
        let tiles = tiles_x * cfg.height.div_ceil(cfg.tile);
        if tiles < cfg.classes {
            return Err(HyveError::Input(format!(
                "{tiles} regions cannot hold {} classes",
                cfg.classes
            )));
        }
        let mut labels: Vec<u32> = (0..tiles).map(|t| (t % cfg.classes) as u32).collect();
        labels.shuffle(rng);
        let spread = |rng: &mut ChaCha8Rng, s: f64| {
            if s > 0.0 {
                rng.random_range(-s..s)
            } else {
                0.0
            }
        };
        let (lo, hi) = cfg.range;
        let nuisance = (0..tiles)
            .map(|_| Nuisance {
                gain: 1.0 + spread(rng, cfg.gain_spread),
                offset: spread(rng, cfg.offset_spread),
                tilt: spread(rng, cfg.tilt_spread),
                shape: SpectrumBump::Gaussian {
                    center: rng.random_range(lo..hi),
                    sd: rng.random_range(0.10..0.25) * (hi - lo),
                    amplitude: spread(rng, cfg.shape_spread),
                },
            })
            .collect();
        self.tiles_x = tiles_x;
        self.tile_labels = labels;
        self.tile_nuisance = nuisance;
        Ok(())
    }

    /// A new region layout and nuisance draw over the same class spectra.
    pub fn relayout(&self, height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut scene = self.clone();
        scene.config.height = height;
        scene.config.width = width;
        scene.config.seed = seed;
        scene.layout(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed1a_4007))?;
        Ok(scene)
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn range(&self) -> (f64, f64) {
        self.config.range
    }

    pub fn spectra(&self) -> &[ClassSpectrum] {
        &self.spectra
    }

    fn tile_of(&self, h: usize, w: usize) -> usize {
        (h / self.config.tile) * self.tiles_x + w / self.config.tile
    }

    pub fn label(&self, h: usize, w: usize) -> u32 {
        self.tile_labels[self.tile_of(h, w)]
    }

    pub fn nuisance(&self, h: usize, w: usize) -> Nuisance {
        self.tile_nuisance[self.tile_of(h, w)]
    }

    pub fn labels(&self) -> Vec<u32> {
        (0..self.height())
            .flat_map(|h| (0..self.width()).map(move |w| (h, w)))
            .map(|(h, w)| self.label(h, w))
            .collect()
    }

    /// Noise-free reflectance of pixel `(h, w)` at wavelength `l`.
    pub fn pixel_spectrum(&self, h: usize, w: usize, l: f64) -> f64 {
        let n = self.nuisance(h, w);
        let (lo, hi) = self.config.range;
        let s = &self.spectra[self.label(h, w) as usize];
        n.gain * s.eval(l)
            + n.offset
            + n.tilt * (l - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
            + n.shape.eval(l)
    }
}

/// Records `scene` with `camera`, adding independent Gaussian noise of
/// standard deviation `noise_sd` to every value. Placeholder channels stay zero.
pub fn sample_camera(
    scene: &SpectralScene,
    camera: &CameraDescriptor,
    noise_sd: f64,
    seed: u64,
) -> Result<HyperCube> {
    let (lo, hi) = scene.range();
    if let Some(&bad) = camera
        .real_wavelengths()
        .iter()
        .find(|&&l| l < lo || l > hi)
    {
        return Err(HyveError::Input(format!(
            "camera '{}' wavelength {bad} nm lies outside the scene range [{lo}, {hi}]",
            camera.name()
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(HyveError::Input(format!(
            "noise sd {noise_sd} must be finite and non-negative"
        )));
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|e| HyveError::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = camera.real_wavelengths().len();
    let (height, width) = (scene.height(), scene.width());
    let mut data = Vec::with_capacity(height * width * camera.channels());
    for h in 0..height {
        for w in 0..width {
            for (c, &l) in camera.wavelengths().iter().enumerate() {
                let v = if c < real {
                    let clean = scene.pixel_spectrum(h, w, l);
                    if noise_sd > 0.0 {
                        clean + noise.sample(&mut rng)
                    } else {
                        clean
                    }
                } else {
                    0.0
                };
                data.push(v);
            }
        }
    }
    HyperCube::new(height, width, data, camera.clone(), Some(scene.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANGE: (f64, f64) = (390.0, 1010.0);

    #[test]
    fn deterministic_in_seed() {
        let a = generate_scene(3, 32, 32, RANGE, 4).unwrap();
        let b = generate_scene(3, 32, 32, RANGE, 4).unwrap();
        let c = generate_scene(3, 32, 32, RANGE, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn every_class_present() {
        for seed in 0..10 {
            let s = generate_scene(3, 32, 32, RANGE, seed).unwrap();
            let labels = s.labels();
            for k in 0..3 {
                assert!(labels.contains(&k), "seed {seed} misses class {k}");
            }
        }
    }

    #[test]
    fn spectra_have_bounded_derivative() {
        let s = generate_scene(4, 16, 16, RANGE, 9).unwrap();
        let step = (RANGE.1 - RANGE.0) / 999.0;
        for spec in s.spectra() {
            let bound = spec.derivative_bound();
            let values: Vec<f64> = (0..1000)
                .map(|i| spec.eval(RANGE.0 + i as f64 * step))
                .collect();
            for pair in values.windows(2) {
                assert!(((pair[1] - pair[0]) / step).abs() <= bound * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn narrow_pair_differs_only_inside_band() {
        let s = generate_scene(3, 16, 16, RANGE, 2).unwrap();
        let (a, b) = (&s.spectra()[0], &s.spectra()[1]);
        let Some(SpectrumBump::RaisedCosine {
            center, half_width, ..
        }) = b.bumps.last().copied()
        else {
            panic!("second class lacks the narrow band");
        };
        assert!(2.0 * half_width <= 30.0);
        for i in 0..=620 {
            let l = RANGE.0 + i as f64;
            if (l - center).abs() >= half_width {
                assert_eq!(a.eval(l), b.eval(l));
            }
        }
        assert!(b.eval(center) > a.eval(center));
    }

    #[test]
    fn noise_free_sampling_matches_spectrum_and_cameras_agree() {
        let s = generate_scene(3, 16, 16, RANGE, 1).unwrap();
        let cam_a = CameraDescriptor::specim();
        let cam_b = cam_a.subset(2, 0, "b").unwrap();
        let a = sample_camera(&s, &cam_a, 0.0, 3).unwrap();
        let b = sample_camera(&s, &cam_b, 0.0, 4).unwrap();
        assert_eq!(a.channels(), 224);
        assert_eq!(b.channels(), 112);
        for h in 0..16 {
            for w in 0..16 {
                for (c, &l) in cam_a.wavelengths().iter().enumerate() {
                    assert_eq!(a.pixel(h, w)[c], s.pixel_spectrum(h, w, l));
                }
                for c in 0..112 {
                    assert_eq!(b.pixel(h, w)[c], a.pixel(h, w)[2 * c]);
                }
            }
        }
        assert_eq!(a.labels().unwrap(), s.labels().as_slice());
    }

    #[test]
    fn camera_outside_range_is_rejected() {
        let s = generate_scene(2, 16, 16, (500.0, 800.0), 1).unwrap();
        assert!(matches!(
            sample_camera(&s, &CameraDescriptor::specim(), 0.0, 0),
            Err(HyveError::Input(_))
        ));
    }

    #[test]
    fn relayout_keeps_spectra() {
        let s = generate_scene(3, 16, 16, RANGE, 1).unwrap();
        let t = s.relayout(24, 8, 77).unwrap();
        assert_eq!(s.spectra(), t.spectra());
        assert_eq!((t.height(), t.width()), (24, 8));
        assert_ne!(s.labels(), t.labels());
    }
}
