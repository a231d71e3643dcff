//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and stay callable (and testable) outside the browser.

use hyve::camera::{Alignment, CameraDescriptor, Normalization, Preprocessing, SceneConfig};
use hyve::nets::{FirstLayerKind, Model, ModelConfig};
use hyve::train::{evaluate_per_camera, train, Dataset, SyntheticTask, TrainConfig};
use hyve::wroi::{gaussian_eval, range_impact, GaussianWroiSet, HyveConvConfig, HyveConvLayer};
use hyve::{HyveError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 241;

fn initial_variance(g: usize, range: (f64, f64), sd_fraction: f64) -> Option<f64> {
    (sd_fraction > 0.0).then(|| {
        let sd = sd_fraction * (range.1 - range.0) / g as f64;
        sd * sd
    })
}

pub fn camera(name: &str) -> Result<CameraDescriptor> {
    match name {
        "specim" => Ok(CameraDescriptor::specim()),
        "corning" => Ok(CameraDescriptor::corning()),
        "specim/2" => CameraDescriptor::specim().subset(2, 0, "specim/2"),
        "specim/4" => CameraDescriptor::specim().subset(4, 1, "specim/4"),
        other => Err(HyveError::Input(format!("unknown camera '{other}'"))),
    }
}

/// Initial WROI densities sampled over `[w_min, w_max]`.
pub fn wroi_curves_json(g: usize, w_min: f64, w_max: f64, sd_fraction: f64) -> Result<Value> {
    let wrois = GaussianWroiSet::init_with_variance(
        g,
        w_min,
        w_max,
        initial_variance(g, (w_min, w_max), sd_fraction),
    )?;
    let variances = wrois.variances();
    let xs: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| w_min + (w_max - w_min) * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let curves = wrois
        .means()
        .iter()
        .zip(&variances)
        .map(|(&m, &v)| xs.iter().map(|&x| gaussian_eval(x, m, v)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(json!({
        "means": wrois.means(),
        "variances": variances,
        "xs": xs,
        "curves": curves,
    }))
}

/// Range-impact matrix of one freshly initialized layer on `camera_name`,
/// with the Frobenius norm of each synthesized channel kernel.
pub fn camera_kernels_json(
    camera_name: &str,
    g: usize,
    sd_fraction: f64,
    seed: u64,
) -> Result<Value> {
    let range = (390.0, 1010.0);
    let cam = camera(camera_name)?;
    let mut cfg = HyveConvConfig::new(g, 4, range, true);
    cfg.initial_variance = initial_variance(g, range, sd_fraction);
    let layer = HyveConvLayer::new(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let ri = range_impact(cam.wavelengths(), layer.wrois())?;
    let kernels = layer.synthesize_for(cam.wavelengths())?;
    let per_channel = kernels.numel() / cam.channels();
    let norms: Vec<f64> = kernels
        .data()
        .chunks(per_channel)
        .map(|k| k.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let rows: Vec<&[f64]> = ri.values.data().chunks(g).collect();
    Ok(json!({
        "camera": cam.name(),
        "wavelengths": cam.wavelengths(),
        "range_impact": rows,
        "kernel_norms": norms,
    }))
}

/// Trains a small HyveConv++ network on two cameras (the Specim grid and
/// its stride-2 subset) and reports losses, WROI trajectories and per-camera
/// test accuracy.
pub fn train_demo_json(seed: u64, epochs: usize, g: usize) -> Result<Value> {
    let range = (390.0, 1010.0);
    let full = CameraDescriptor::specim();
    let half = full.subset(2, 0, "specim/2")?;
    let mut scene = SceneConfig::new(3, 48, 48, range, seed);
    scene.narrow_classes = 2;
    scene.narrow_centers = vec![850.0, 624.0];
    scene.narrow_band.amplitude = 0.2;
    let mut task = SyntheticTask::new(scene, vec![full, half]);
    task.train_size = (48, 48);
    task.test_size = (32, 32);
    let data = task.build()?;

    let mut mc = ModelConfig::new(FirstLayerKind::HyvePlusPlus, data.classes);
    mc.g = g;
    mc.widths = vec![8, 8];
    mc.wavelength_range = data.wavelength_range();
    mc.initial_variance = initial_variance(g, mc.wavelength_range, 0.25);
    mc.seed = seed;
    let mut model = Model::build(&mc)?;
    let tc = TrainConfig {
        epochs,
        batch_size: 8,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    };
    let pre = Preprocessing::new(Normalization::Snv, Alignment::None);
    let train_set = Dataset::from_cubes(&data.train, tc.patch_size, &pre)?;
    let test_set = Dataset::from_cubes(&data.test, tc.patch_size, &pre)?;
    let history = train(&mut model, &train_set, None, &tc)?;
    let per_camera = evaluate_per_camera(&mut model, &test_set)?;

    let losses: Vec<f64> = (1..=history.epochs())
        .filter_map(|e| history.loss(e))
        .collect();
    let trajectory: Vec<Value> = history
        .wroi
        .iter()
        .map(|s| json!([s.epoch, s.wroi, s.mean_nm, s.variance_nm2]))
        .collect();
    let oa: serde_json::Map<String, Value> = per_camera
        .iter()
        .map(|(c, m)| (c.clone(), json!(m.oa)))
        .collect();
    Ok(json!({
        "loss": losses,
        "trajectory": trajectory,
        "test_oa": oa,
        "bands_nm": [850.0, 624.0],
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn wroi_curves(
    g: usize,
    w_min: f64,
    w_max: f64,
    sd_fraction: f64,
) -> std::result::Result<String, JsError> {
    to_js(wroi_curves_json(g, w_min, w_max, sd_fraction))
}

#[wasm_bindgen]
pub fn camera_kernels(
    camera: &str,
    g: usize,
    sd_fraction: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(camera_kernels_json(camera, g, sd_fraction, seed.into()))
}

#[wasm_bindgen]
pub fn train_demo(seed: u32, epochs: usize, g: usize) -> std::result::Result<String, JsError> {
    to_js(train_demo_json(seed.into(), epochs, g))
}
