//! Mini-batch training, evaluation and experiment runners.

mod adam;
mod experiments;
mod history;
mod metrics;

pub use adam::{Adam, AdamParams};
pub use experiments::{
    mean_oa, reference_experiment, reference_task, run_camera_agnostic_experiment,
    run_extension_ablation, run_freeze_ablation, run_g_sweep, thread_limit, write_summary_csv,
    Arch, ExperimentConfig, ExperimentRow, SyntheticTask, TaskData, REFERENCE_BANDS_NM,
};
pub use history::{trajectory_from_csv, trajectory_to_csv, HistoryRow, TrainHistory};
pub use metrics::Metrics;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::camera::{CameraDescriptor, HyperCube, Preprocessing};
use crate::error::{HyveError, Result};
use crate::nets::Model;
use crate::params::ParamKind;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Zero epochs records the untrained model only.
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate for prototypes, convolution weights and the head.
    pub learning_rate: f64,
    /// Learning rate for the WROI means, in nm per step.
    pub mean_learning_rate: f64,
    /// Learning rate for the raw WROI variances, as a fraction of the mean
    /// WROI variance at the start of training.
    pub variance_learning_rate: f64,
    pub adam: AdamParams,
    pub seed: u64,
    /// Keeps WROI means and variances at their initial values.
    pub freeze_gaussians: bool,
    /// Side of the square training windows cut from each cube.
    pub patch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            mean_learning_rate: 0.3,
            variance_learning_rate: 1e-3,
            adam: AdamParams::default(),
            seed: 0,
            freeze_gaussians: false,
            patch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patch_size == 0 {
            return Err(HyveError::Config(
                "batch and patch sizes must be positive".into(),
            ));
        }
        for (name, lr) in [
            ("learning rate", self.learning_rate),
            ("mean learning rate", self.mean_learning_rate),
            ("variance learning rate", self.variance_learning_rate),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(HyveError::Config(format!(
                    "{name} must be positive, got {lr}"
                )));
            }
        }
        Ok(())
    }

    fn rate_for(&self, kind: ParamKind, variance_scale: f64) -> Option<f64> {
        match kind {
            ParamKind::WroiMean | ParamKind::WroiVariance if self.freeze_gaussians => None,
            ParamKind::WroiMean => Some(self.mean_learning_rate),
            ParamKind::WroiVariance => Some(self.variance_learning_rate * variance_scale),
            _ => Some(self.learning_rate),
        }
    }
}

/// Patches of one camera, stored channel-major (`C×P×P` each).
#[derive(Clone, Debug)]
pub struct CameraGroup {
    pub camera: CameraDescriptor,
    pub patch: usize,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl CameraGroup {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let c = self.camera.channels();
        let mut data = Vec::with_capacity(indices.len() * c * self.patch * self.patch);
        for &i in indices {
            data.extend_from_slice(&self.inputs[i]);
        }
        Tensor::new(vec![indices.len(), c, self.patch, self.patch], data)
    }
}

/// Labeled patches grouped by camera; a batch never mixes cameras.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub groups: Vec<CameraGroup>,
}

impl Dataset {
    /// Cuts every cube into non-overlapping `patch × patch` windows after
    /// applying `preprocessing`. A window's label is its most frequent pixel
    /// label (lowest class on ties). Cubes whose (preprocessed) wavelengths
    /// agree share a group.
    pub fn from_cubes(
        cubes: &[HyperCube],
        patch: usize,
        preprocessing: &Preprocessing,
    ) -> Result<Self> {
        if patch == 0 {
            return Err(HyveError::Config("patch size must be positive".into()));
        }
        let mut groups: Vec<CameraGroup> = Vec::new();
        for (n, raw) in cubes.iter().enumerate() {
            let labels = raw
                .labels()
                .ok_or_else(|| HyveError::Input(format!("cube {n} has no labels")))?;
            let max_label = *labels.iter().max().expect("non-empty cube") as usize;
            let cube = preprocessing.apply(raw)?;
            let c = cube.channels();
            let gi = match groups
                .iter()
                .position(|g| g.camera.wavelengths() == cube.camera().wavelengths())
            {
                Some(i) => i,
                None => {
                    groups.push(CameraGroup {
                        camera: cube.camera().clone(),
                        patch,
                        inputs: Vec::new(),
                        labels: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            let group = &mut groups[gi];
            for top in (0..cube.height().saturating_sub(patch - 1)).step_by(patch) {
                for left in (0..cube.width().saturating_sub(patch - 1)).step_by(patch) {
                    let mut input = vec![0.0; c * patch * patch];
                    let mut votes = vec![0usize; max_label + 1];
                    for y in 0..patch {
                        for x in 0..patch {
                            let pixel = cube.pixel(top + y, left + x);
                            for (ch, &v) in pixel.iter().enumerate() {
                                input[(ch * patch + y) * patch + x] = v;
                            }
                            votes[labels[(top + y) * cube.width() + left + x] as usize] += 1;
                        }
                    }
                    let label = (0..votes.len())
                        .max_by_key(|&k| (votes[k], std::cmp::Reverse(k)))
                        .expect("non-empty votes");
                    group.inputs.push(input);
                    group.labels.push(label);
                }
            }
        }
        groups.retain(|g| !g.is_empty());
        if groups.is_empty() {
            return Err(HyveError::Input(format!(
                "no {patch}x{patch} patch fits in the given cubes"
            )));
        }
        Ok(Dataset { groups })
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(CameraGroup::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_label(&self) -> Option<usize> {
        self.groups
            .iter()
            .flat_map(|g| g.labels.iter().copied())
            .max()
    }

    /// Subset holding only the group recorded with `camera`'s wavelengths.
    pub fn for_camera(&self, camera: &CameraDescriptor) -> Option<Dataset> {
        self.groups
            .iter()
            .find(|g| g.camera.wavelengths() == camera.wavelengths())
            .map(|g| Dataset {
                groups: vec![g.clone()],
            })
    }
}

fn wavelengths_for<'a>(model: &Model, camera: &'a CameraDescriptor) -> Option<&'a [f64]> {
    model
        .kind()
        .is_wavelength_aware()
        .then(|| camera.wavelengths())
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean loss and metrics of `model` on `data`, in batches of `batch_size`.
pub fn evaluate_with_loss(
    model: &Model,
    data: &Dataset,
    batch_size: usize,
) -> Result<(f64, Metrics)> {
    if data.is_empty() {
        return Err(HyveError::Input("cannot evaluate an empty dataset".into()));
    }
    let classes = model.num_classes();
    let mut labels = Vec::with_capacity(data.len());
    let mut preds = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0;
    for group in &data.groups {
        let all: Vec<usize> = (0..group.len()).collect();
        for chunk in all.chunks(batch_size.max(1)) {
            let mut tape = Tape::new();
            let x = tape.constant(group.batch(chunk)?);
            let (logits, _) = model.forward(&mut tape, x, wavelengths_for(model, &group.camera))?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| group.labels[i]).collect();
            let loss = tape.softmax_cross_entropy(logits, &batch_labels)?;
            loss_sum += tape.value(loss).data()[0] * chunk.len() as f64;
            preds.extend(tape.value(logits).data().chunks(classes).map(argmax));
            labels.extend(batch_labels);
        }
    }
    Ok((
        loss_sum / labels.len() as f64,
        Metrics::from_predictions(&labels, &preds, classes)?,
    ))
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Metrics> {
    evaluate_with_loss(model, data, 64).map(|(_, m)| m)
}

/// Trains `model` in place. Epoch 0 of the history is the untrained model.
pub fn train(
    model: &mut Model,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_data.is_empty() {
        return Err(HyveError::Input("training set is empty".into()));
    }
    if let Some(max) = train_data
        .max_label()
        .into_iter()
        .chain(test_data.and_then(Dataset::max_label))
        .max()
    {
        if max >= model.num_classes() {
            return Err(HyveError::Input(format!(
                "label {max} out of range for {} classes",
                model.num_classes()
            )));
        }
    }
    let variance_scale = model.hyve_layer().map_or(1.0, |l| {
        let v = l.wrois().variances();
        v.iter().sum::<f64>() / v.len() as f64
    });
    let lrs: Vec<Option<f64>> = model
        .parameters()
        .iter()
        .map(|p| cfg.rate_for(p.kind, variance_scale))
        .collect();
    let mut adam = Adam::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();

    let (loss0, train0) = evaluate_with_loss(model, train_data, cfg.batch_size)?;
    history.record_epoch(
        0,
        loss0,
        &train0,
        test_data.map(|t| evaluate(model, t)).transpose()?.as_ref(),
        model.wroi_snapshot(0),
    );

    for epoch in 1..=cfg.epochs {
        let mut batches: Vec<(usize, Vec<usize>)> = Vec::new();
        for (gi, group) in train_data.groups.iter().enumerate() {
            let mut order: Vec<usize> = (0..group.len()).collect();
            order.shuffle(&mut rng);
            batches.extend(order.chunks(cfg.batch_size).map(|c| (gi, c.to_vec())));
        }
        batches.shuffle(&mut rng);

        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (gi, indices) in &batches {
            let group = &train_data.groups[*gi];
            let mut tape = Tape::new();
            let x = tape.constant(group.batch(indices)?);
            let (logits, bound) =
                model.forward(&mut tape, x, wavelengths_for(model, &group.camera))?;
            let labels: Vec<usize> = indices.iter().map(|&i| group.labels[i]).collect();
            let loss = tape.softmax_cross_entropy(logits, &labels)?;
            tape.backward(loss)?;

            loss_sum += tape.value(loss).data()[0] * labels.len() as f64;
            let classes = model.num_classes();
            correct += tape
                .value(logits)
                .data()
                .chunks(classes)
                .map(argmax)
                .zip(&labels)
                .filter(|(p, l)| p == *l)
                .count();
            seen += labels.len();

            let grads: Vec<&Tensor> = bound.iter().map(|&v| tape.grad(v)).collect();
            let mut params = model.parameters_mut();
            adam.step(&mut params, &grads, &lrs)?;
        }
        let train_acc = correct as f64 / seen as f64;
        let test_metrics = test_data.map(|t| evaluate(model, t)).transpose()?;
        history.record_running_epoch(
            epoch,
            loss_sum / seen as f64,
            train_acc,
            test_metrics.as_ref(),
            model.wroi_snapshot(epoch),
        );
    }
    history.final_train = Some(evaluate(model, train_data)?);
    history.final_test = test_data.map(|t| evaluate(model, t)).transpose()?;
    Ok(history)
}

/// Metrics per camera name, evaluated with frozen kernels where applicable.
pub fn evaluate_per_camera(model: &mut Model, data: &Dataset) -> Result<BTreeMap<String, Metrics>> {
    let mut out = BTreeMap::new();
    for group in &data.groups {
        model.freeze_kernels(&group.camera)?;
        let single = Dataset {
            groups: vec![group.clone()],
        };
        out.insert(group.camera.name().to_string(), evaluate(model, &single)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{FirstLayerKind, ModelConfig};

    fn toy(camera: &CameraDescriptor, values: [f64; 2], tiles: usize) -> HyperCube {
        let (h, w, c) = (4 * tiles, 4, camera.channels());
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for y in 0..h {
            for _ in 0..w {
                let class = (y / 4) % 2;
                data.extend(std::iter::repeat_n(values[class], c));
                labels.push(class as u32);
            }
        }
        HyperCube::new(h, w, data, camera.clone(), Some(labels)).unwrap()
    }

    #[test]
    fn patches_are_channel_major() {
        let cam = CameraDescriptor::linspace("c", 400.0, 700.0, 3).unwrap();
        let data: Vec<f64> = (0..4 * 4 * 3).map(|i| i as f64).collect();
        let cube = HyperCube::new(4, 4, data, cam, Some(vec![1; 16])).unwrap();
        let ds = Dataset::from_cubes(std::slice::from_ref(&cube), 2, &Preprocessing::identity())
            .unwrap();
        assert_eq!(ds.len(), 4);
        let first = &ds.groups[0].inputs[0];
        // channel 1, row 1, column 0 of the top-left window
        assert_eq!(first[(1 * 2 + 1) * 2], cube.pixel(1, 0)[1]);
    }

    #[test]
    fn separable_toy_task_is_learned() {
        let cam = CameraDescriptor::linspace("toy", 450.0, 850.0, 6).unwrap();
        let data = Dataset::from_cubes(&[toy(&cam, [0.2, 0.8], 8)], 4, &Preprocessing::identity())
            .unwrap();
        let mut cfg = ModelConfig::new(FirstLayerKind::HyvePlusPlus, 2);
        cfg.widths = vec![4, 4];
        cfg.wavelength_range = (450.0, 850.0);
        let mut model = Model::build(&cfg).unwrap();
        let tc = TrainConfig {
            epochs: 20,
            batch_size: 2,
            learning_rate: 2e-2,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &data, None, &tc).unwrap();
        assert!((history.loss(0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(history.final_train.as_ref().unwrap().oa, 1.0);
    }

    #[test]
    fn frozen_gaussians_do_not_move() {
        let cam = CameraDescriptor::linspace("toy", 450.0, 850.0, 6).unwrap();
        let data = Dataset::from_cubes(&[toy(&cam, [0.3, 0.6], 4)], 4, &Preprocessing::identity())
            .unwrap();
        let mut cfg = ModelConfig::new(FirstLayerKind::Hyve, 2);
        cfg.widths = vec![3];
        let mut model = Model::build(&cfg).unwrap();
        let before = model.hyve_layer().unwrap().wrois().clone();
        let kp_before = model.hyve_layer().unwrap().prototypes().prototypes.clone();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 2,
            freeze_gaussians: true,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &data, None, &tc).unwrap();
        assert_eq!(model.hyve_layer().unwrap().wrois(), &before);
        assert_ne!(
            model.hyve_layer().unwrap().prototypes().prototypes,
            kp_before
        );
        assert_eq!(history.wroi.len(), 4 * 5);
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let cam = CameraDescriptor::linspace("toy", 450.0, 850.0, 6).unwrap();
        let data = Dataset::from_cubes(&[toy(&cam, [0.3, 0.6], 4)], 4, &Preprocessing::identity())
            .unwrap();
        let mut cfg = ModelConfig::new(FirstLayerKind::Hyve, 2);
        cfg.widths = vec![3];
        let mut model = Model::build(&cfg).unwrap();
        assert!(train(
            &mut model,
            &Dataset::default(),
            None,
            &TrainConfig::default()
        )
        .is_err());
        let mut relabeled = data.clone();
        relabeled.groups[0].labels[0] = 5;
        assert!(matches!(
            train(&mut model, &relabeled, None, &TrainConfig::default()),
            Err(HyveError::Input(_))
        ));
        assert!(matches!(
            train(
                &mut model,
                &data,
                None,
                &TrainConfig {
                    batch_size: 0,
                    ..TrainConfig::default()
                }
            ),
            Err(HyveError::Config(_))
        ));
    }
}
