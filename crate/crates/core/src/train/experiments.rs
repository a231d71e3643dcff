//! Seeded multi-run experiments on synthetic multi-camera data.

use std::fmt::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{evaluate, train, Dataset, TrainConfig};
use crate::camera::{
    sample_camera, Alignment, CameraDescriptor, HyperCube, Normalization, Preprocessing,
    SceneConfig, SpectralScene,
};
use crate::error::{HyveError, Result};
use crate::nets::{FirstLayerKind, Model, ModelConfig};

/// A synthetic recording campaign: one set of class spectra, recorded by
/// several cameras. The first camera gets full-size training scenes; every
/// other camera records training scenes `secondary_fraction` as tall. Test
/// scenes have the same size for every camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub scene: SceneConfig,
    pub cameras: Vec<CameraDescriptor>,
    pub train_size: (usize, usize),
    pub test_size: (usize, usize),
    pub secondary_fraction: f64,
    pub noise_sd: f64,
}

/// Labeled cubes of a [`SyntheticTask`], one train and one test cube per camera.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub cameras: Vec<CameraDescriptor>,
    pub train: Vec<HyperCube>,
    pub test: Vec<HyperCube>,
    pub classes: usize,
}

impl SyntheticTask {
    pub fn new(scene: SceneConfig, cameras: Vec<CameraDescriptor>) -> Self {
        SyntheticTask {
            scene,
            cameras,
            train_size: (64, 64),
            test_size: (48, 48),
            secondary_fraction: 0.5,
            noise_sd: 0.01,
        }
    }

    pub fn build(&self) -> Result<TaskData> {
        if self.cameras.is_empty() {
            return Err(HyveError::Input("a task needs at least one camera".into()));
        }
        if !(self.secondary_fraction > 0.0 && self.secondary_fraction <= 1.0) {
            return Err(HyveError::Input(format!(
                "secondary fraction {} must lie in (0, 1]",
                self.secondary_fraction
            )));
        }
        let base = SpectralScene::generate(&self.scene)?;
        let seed = self.scene.seed;
        let tile = self.scene.tile;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (k, cam) in self.cameras.iter().enumerate() {
            let fraction = if k == 0 { 1.0 } else { self.secondary_fraction };
            // Heights stay whole multiples of the region size.
            let height =
                |h: usize| (((h as f64 * fraction) / tile as f64).round() as usize).max(1) * tile;
            let k = k as u64;
            let train_scene = base.relayout(
                height(self.train_size.0),
                self.train_size.1,
                seed.wrapping_mul(1000).wrapping_add(2 * k + 1),
            )?;
            let test_scene = base.relayout(
                self.test_size.0,
                self.test_size.1,
                seed.wrapping_mul(1000).wrapping_add(2 * k + 2),
            )?;
            train.push(sample_camera(
                &train_scene,
                cam,
                self.noise_sd,
                seed.wrapping_mul(7919).wrapping_add(2 * k + 1),
            )?);
            test.push(sample_camera(
                &test_scene,
                cam,
                self.noise_sd,
                seed.wrapping_mul(7919).wrapping_add(2 * k + 2),
            )?);
        }
        Ok(TaskData {
            cameras: self.cameras.clone(),
            train,
            test,
            classes: self.scene.classes,
        })
    }
}

impl TaskData {
    /// Smallest and largest wavelength over all cameras.
    pub fn wavelength_range(&self) -> (f64, f64) {
        let lo = self
            .cameras
            .iter()
            .map(|c| c.range().0)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .cameras
            .iter()
            .map(|c| c.range().1)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn max_channels(&self) -> usize {
        self.cameras
            .iter()
            .map(CameraDescriptor::channels)
            .max()
            .unwrap_or(0)
    }
}

/// A first layer together with the preprocessing it needs on mixed cameras.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    /// Dense convolution on cubes zero-padded to the largest channel count.
    Conv2dZeroPad,
    /// Dense convolution on cubes interpolated onto the first camera.
    Conv2dInterp,
    /// Depthwise-separable first layer on interpolated cubes.
    SeparableInterp,
    Hyve,
    HyvePlusPlus,
}

impl Arch {
    pub const ALL: [Arch; 5] = [
        Arch::Conv2dZeroPad,
        Arch::Conv2dInterp,
        Arch::SeparableInterp,
        Arch::Hyve,
        Arch::HyvePlusPlus,
    ];

    /// Inverse of [`Arch::label`].
    pub fn from_label(label: &str) -> Option<Arch> {
        Arch::ALL.into_iter().find(|a| a.label() == label)
    }

    pub fn label(self) -> &'static str {
        match self {
            Arch::Conv2dZeroPad => "conv2d+zeropad",
            Arch::Conv2dInterp => "conv2d+interp",
            Arch::SeparableInterp => "baseline-ds",
            Arch::Hyve => "hyve",
            Arch::HyvePlusPlus => "hyve++",
        }
    }

    pub fn kind(self) -> FirstLayerKind {
        match self {
            Arch::Conv2dZeroPad | Arch::Conv2dInterp => FirstLayerKind::Conv2D,
            Arch::SeparableInterp => FirstLayerKind::DepthwiseSeparable,
            Arch::Hyve => FirstLayerKind::Hyve,
            Arch::HyvePlusPlus => FirstLayerKind::HyvePlusPlus,
        }
    }

    pub fn preprocessing(self, data: &TaskData, normalization: Normalization) -> Preprocessing {
        let alignment = match self {
            Arch::Conv2dZeroPad => Alignment::ZeroPad {
                channels: data.max_channels(),
            },
            Arch::Conv2dInterp | Arch::SeparableInterp => Alignment::Interpolate {
                target: data.cameras[0].clone(),
            },
            Arch::Hyve | Arch::HyvePlusPlus => Alignment::None,
        };
        Preprocessing::new(normalization, alignment)
    }
}

/// Shared settings of an experiment. The `model` template supplies widths,
/// kernel size and G; its first-layer kind, channels and seed are set per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Initial WROI standard deviation as a fraction of `(w_max - w_min) / G`;
    /// `None` keeps the model template's variance.
    pub initial_sd_fraction: Option<f64>,
    /// Applied to every architecture alike.
    pub normalization: Normalization,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        ExperimentConfig {
            model,
            train,
            seeds: vec![1, 2, 3],
            initial_sd_fraction: None,
            normalization: Normalization::Snv,
            threads: 1,
        }
    }
}

/// One line of an experiment summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub setting: String,
    pub seed: u64,
    pub camera: String,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

struct Job {
    setting: String,
    arch: Arch,
    g: usize,
    freeze: bool,
    seed: u64,
}

/// `HYVE_THREADS` if set to a positive integer, otherwise 1.
pub fn thread_limit() -> usize {
    std::env::var("HYVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

fn run_job(
    experiment: &str,
    job: &Job,
    data: &TaskData,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    let pre = job.arch.preprocessing(data, cfg.normalization);
    let range = data.wavelength_range();
    let mut mc = cfg.model.clone();
    mc.first_layer = job.arch.kind();
    mc.g = job.g;
    mc.num_classes = data.classes;
    mc.seed = job.seed;
    mc.in_channels = pre.output_channels();
    if mc.first_layer.is_wavelength_aware() {
        mc.in_channels = None;
        mc.wavelength_range = range;
        if let Some(f) = cfg.initial_sd_fraction {
            let sd = f * (range.1 - range.0) / job.g as f64;
            mc.initial_variance = Some(sd * sd);
        }
    }
    let mut model = Model::build(&mc)?;
    let tc = TrainConfig {
        seed: job.seed,
        freeze_gaussians: job.freeze,
        ..cfg.train.clone()
    };
    let train_set = Dataset::from_cubes(&data.train, tc.patch_size, &pre)?;
    train(&mut model, &train_set, None, &tc)?;
    let mut rows = Vec::new();
    for cube in &data.test {
        model.freeze_kernels(cube.camera())?;
        let test_set = Dataset::from_cubes(std::slice::from_ref(cube), tc.patch_size, &pre)?;
        let m = evaluate(&model, &test_set)?;
        rows.push(ExperimentRow {
            experiment: experiment.into(),
            setting: job.setting.clone(),
            seed: job.seed,
            camera: cube.camera().name().into(),
            oa: m.oa,
            aa: m.aa,
            kappa: m.kappa,
        });
    }
    Ok(rows)
}

/// Runs every job on up to `cfg.threads` threads. Results come back in job
/// order regardless of scheduling.
fn run_jobs(
    experiment: &str,
    jobs: Vec<Job>,
    data: &TaskData,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    if cfg.seeds.is_empty() {
        return Err(HyveError::Config(
            "an experiment needs at least one seed".into(),
        ));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<ExperimentRow>>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = cfg.threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = run_job(experiment, &jobs[i], data, cfg);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("result lock") {
        rows.extend(r.expect("every job ran")?);
    }
    Ok(rows)
}

fn jobs_for(settings: &[(String, Arch, usize, bool)], seeds: &[u64]) -> Vec<Job> {
    settings
        .iter()
        .flat_map(|(setting, arch, g, freeze)| {
            seeds.iter().map(move |&seed| Job {
                setting: setting.clone(),
                arch: *arch,
                g: *g,
                freeze: *freeze,
                seed,
            })
        })
        .collect()
}

/// Trains each architecture on the mixed-camera training cubes and
/// evaluates it on every camera's test cube separately.
pub fn run_camera_agnostic_experiment(
    data: &TaskData,
    archs: &[Arch],
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    let settings: Vec<_> = archs
        .iter()
        .map(|&a| (a.label().to_string(), a, cfg.model.g, false))
        .collect();
    run_jobs(
        "camera-agnostic",
        jobs_for(&settings, &cfg.seeds),
        data,
        cfg,
    )
}

pub fn run_g_sweep(
    data: &TaskData,
    g_values: &[usize],
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    if g_values.len() < 2 {
        return Err(HyveError::Config(
            "a G sweep needs at least two values".into(),
        ));
    }
    let settings: Vec<_> = g_values
        .iter()
        .map(|&g| (format!("g={g}"), Arch::HyvePlusPlus, g, false))
        .collect();
    run_jobs("g", jobs_for(&settings, &cfg.seeds), data, cfg)
}

pub fn run_extension_ablation(
    data: &TaskData,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    let settings: Vec<_> = [Arch::SeparableInterp, Arch::Hyve, Arch::HyvePlusPlus]
        .iter()
        .map(|&a| (a.label().to_string(), a, cfg.model.g, false))
        .collect();
    run_jobs("extension", jobs_for(&settings, &cfg.seeds), data, cfg)
}

pub fn run_freeze_ablation(data: &TaskData, cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let settings = vec![
        ("frozen".to_string(), Arch::HyvePlusPlus, cfg.model.g, true),
        (
            "trained".to_string(),
            Arch::HyvePlusPlus,
            cfg.model.g,
            false,
        ),
    ];
    run_jobs("freeze", jobs_for(&settings, &cfg.seeds), data, cfg)
}

/// Centres of the two narrow bands of [`reference_task`]. On the stride-2
/// camera the 850 nm band lands on the channel index at which the full camera
/// records the 624 nm band, so index-keyed models see the two bands collide.
pub const REFERENCE_BANDS_NM: [f64; 2] = [850.0, 624.0];

/// The two-camera task behind the camera-agnostic experiment and the
/// ablations: three classes sharing one base spectrum, two of them marked by
/// a 24 nm band, recorded by the Specim grid and its stride-2 subset. The
/// subset camera contributes one row of training regions (an 8:1 imbalance).
pub fn reference_task(seed: u64) -> Result<SyntheticTask> {
    let full = CameraDescriptor::specim();
    let half = full.subset(2, 0, "specim/2")?;
    let mut scene = SceneConfig::new(3, 64, 64, (390.0, 1010.0), seed);
    scene.narrow_classes = 2;
    scene.narrow_centers = REFERENCE_BANDS_NM.to_vec();
    scene.narrow_band.amplitude = 0.2;
    scene.shape_spread = 0.2;
    let mut task = SyntheticTask::new(scene, vec![full, half]);
    task.test_size = (64, 64);
    task.secondary_fraction = 0.125;
    Ok(task)
}

/// Model and training settings that go with [`reference_task`].
pub fn reference_experiment() -> ExperimentConfig {
    let mut model = ModelConfig::new(FirstLayerKind::HyvePlusPlus, 3);
    model.widths = vec![16, 16, 16];
    let train = TrainConfig {
        epochs: 60,
        batch_size: 8,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let mut cfg = ExperimentConfig::new(model, train);
    cfg.initial_sd_fraction = Some(0.25);
    cfg
}

/// Mean OA of `setting` over seeds, restricted to `camera` when given
/// (otherwise over all cameras).
pub fn mean_oa(rows: &[ExperimentRow], setting: &str, camera: Option<&str>) -> Option<f64> {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.setting == setting && camera.is_none_or(|c| r.camera == c))
        .map(|r| r.oa)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn write_summary_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from("experiment,setting,seed,camera,oa,aa,kappa\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.experiment, r.setting, r.seed, r.camera, r.oa, r.aa, r.kappa
        )
        .expect("writing to a String");
    }
    s
}
