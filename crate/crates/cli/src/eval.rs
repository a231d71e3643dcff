use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use hyve::camera::{Alignment, CameraDescriptor};
use hyve::checkpoint::Checkpoint;
use hyve::train::{evaluate_per_camera, Dataset};

use crate::manifest::{self, Split};
use crate::outputs::Outputs;
use crate::CliError;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluates only this camera of the manifest.
    #[arg(long)]
    pub camera: Option<String>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    /// Evaluation is deterministic; the seed is accepted for uniformity.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics CSV (camera,split,metric,value).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fixed-index models read a channel by position, so they only accept
/// cameras whose channels line up with the training data.
fn check_camera(ck: &Checkpoint, camera: &CameraDescriptor) -> Result<(), CliError> {
    let cfg = ck.model.config();
    if cfg.first_layer.is_wavelength_aware() {
        return Ok(());
    }
    let trained_on = |c: &CameraDescriptor| {
        ck.cameras
            .iter()
            .any(|t| t.wavelengths() == c.wavelengths())
    };
    let ok = match &ck.preprocessing.alignment {
        Alignment::Interpolate { .. } => true,
        Alignment::None if ck.cameras.is_empty() => Some(camera.channels()) == cfg.in_channels,
        Alignment::ZeroPad { channels } if ck.cameras.is_empty() => camera.channels() <= *channels,
        Alignment::None | Alignment::ZeroPad { .. } => trained_on(camera),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "camera '{}' ({} channels) does not match the wavelengths this {} model was trained on; \
             fixed-index models need the training cameras or --preproc interp",
            camera.name(),
            camera.channels(),
            cfg.first_layer.label()
        )))
    }
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let mut ck = Checkpoint::load(&args.model)
        .map_err(|e| CliError::Failed(format!("{}: {e}", args.model.display())))?;
    let data = manifest::load(&args.data)?;
    let cameras: Vec<CameraDescriptor> = match &args.camera {
        Some(name) => vec![data
            .camera(name)
            .ok_or_else(|| CliError::Usage(format!("camera '{name}' is not in the manifest")))?
            .clone()],
        None => data.manifest.cameras.clone(),
    };
    for cam in &cameras {
        check_camera(&ck, cam)?;
    }
    let split = match args.split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let mut csv = String::from("camera,split,metric,value\n");
    for cam in &cameras {
        let cubes = data.cubes(args.split, Some(cam.name()))?;
        if cubes.is_empty() {
            continue;
        }
        let set = Dataset::from_cubes(&cubes, args.patch, &ck.preprocessing)?;
        let before = ck.model.hyve_layer().map(|l| l.synthesis_count());
        let metrics = evaluate_per_camera(&mut ck.model, &set)?;
        let syntheses = ck
            .model
            .hyve_layer()
            .zip(before)
            .map(|(l, b)| l.synthesis_count() - b);
        for m in metrics.values() {
            print!(
                "{:<16} {split:<5} OA {:.4} AA {:.4} kappa {:.4} ({} patches)",
                cam.name(),
                m.oa,
                m.aa,
                m.kappa,
                m.total
            );
            match syntheses {
                Some(n) => println!(", kernels synthesized {n}x"),
                None => println!(),
            }
            for (metric, value) in [("oa", m.oa), ("aa", m.aa), ("kappa", m.kappa)] {
                writeln!(csv, "{},{split},{metric},{value}", cam.name()).expect("String write");
            }
        }
    }
    if let Some(path) = &args.out {
        let mut out = Outputs::new();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            out.dir(parent)?;
        }
        out.write(path, csv)?;
        out.commit();
    }
    Ok(())
}
