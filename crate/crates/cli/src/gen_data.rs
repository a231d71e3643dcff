use std::path::PathBuf;

use clap::Args;
use hyve::camera::{write_cube, CameraDescriptor, SceneConfig};
use hyve::train::{reference_task, SyntheticTask};

use crate::manifest::{Entry, Manifest, Split, MANIFEST_FORMAT, MANIFEST_VERSION};
use crate::outputs::Outputs;
use crate::CliError;

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Side of the training cube of the first camera, in pixels.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Side of every test cube; defaults to --size.
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Comma-separated cameras: specim, corning, subset:STRIDE:OFFSET (of
    /// specim) or linspace:MIN_NM:MAX_NM:CHANNELS.
    #[arg(long, value_delimiter = ',', default_value = "specim,corning")]
    pub cameras: Vec<String>,
    /// Training height of every camera after the first, relative to the first.
    #[arg(long, default_value_t = 1.0)]
    pub secondary_fraction: f64,
    /// Classes marked by a narrow band on a shared base spectrum.
    #[arg(long, default_value_t = 1)]
    pub narrow_classes: usize,
    #[arg(long, default_value_t = 0.06)]
    pub band_amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    pub shape_spread: f64,
    /// Sensor noise standard deviation, in reflectance units.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// The two-camera task of the camera-agnostic experiment; ignores every
    /// scene and camera flag except --seed.
    #[arg(long, conflicts_with_all = ["classes", "size", "test_size", "cameras",
        "secondary_fraction", "narrow_classes", "band_amplitude", "shape_spread", "noise"])]
    pub reference: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_camera(spec: &str) -> Result<CameraDescriptor, CliError> {
    let bad = |why: &str| CliError::Usage(format!("invalid camera spec '{spec}': {why}"));
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let num = |s: &str| -> Result<f64, CliError> {
        s.parse::<f64>()
            .map_err(|_| bad(&format!("'{s}' is not a number")))
    };
    let count = |s: &str| -> Result<usize, CliError> {
        s.parse::<usize>()
            .map_err(|_| bad(&format!("'{s}' is not a count")))
    };
    let camera = match parts.as_slice() {
        ["specim"] => CameraDescriptor::specim(),
        ["corning"] => CameraDescriptor::corning(),
        ["subset", stride, offset] => {
            let (s, o) = (count(stride)?, count(offset)?);
            CameraDescriptor::specim()
                .subset(s, o, format!("specim/{s}:{o}"))
                .map_err(|e| bad(&e.to_string()))?
        }
        ["linspace", lo, hi, n] => {
            let (lo, hi, n) = (num(lo)?, num(hi)?, count(n)?);
            CameraDescriptor::linspace(format!("linspace:{lo}:{hi}:{n}"), lo, hi, n)
                .map_err(|e| bad(&e.to_string()))?
        }
        _ => {
            return Err(bad(
                "expected specim, corning, subset:STRIDE:OFFSET or linspace:MIN:MAX:CHANNELS",
            ))
        }
    };
    Ok(camera)
}

fn task_from_flags(args: &GenDataArgs) -> Result<SyntheticTask, CliError> {
    let mut cameras = Vec::new();
    for spec in &args.cameras {
        let cam = parse_camera(spec)?;
        if cameras
            .iter()
            .any(|c: &CameraDescriptor| c.name() == cam.name())
        {
            return Err(CliError::Usage(format!("camera '{spec}' is listed twice")));
        }
        cameras.push(cam);
    }
    if cameras.is_empty() {
        return Err(CliError::Usage("--cameras lists no camera".into()));
    }
    if args.narrow_classes > args.classes {
        return Err(CliError::Usage(format!(
            "--narrow-classes {} exceeds --classes {}",
            args.narrow_classes, args.classes
        )));
    }
    let lo = cameras
        .iter()
        .map(|c| c.range().0)
        .fold(f64::INFINITY, f64::min);
    let hi = cameras
        .iter()
        .map(|c| c.range().1)
        .fold(f64::NEG_INFINITY, f64::max);
    let range = ((lo - 5.0).floor(), (hi + 5.0).ceil());
    let mut scene = SceneConfig::new(args.classes, args.size, args.size, range, args.seed);
    scene.narrow_classes = args.narrow_classes;
    scene.narrow_band.amplitude = args.band_amplitude;
    scene.shape_spread = args.shape_spread;
    let mut task = SyntheticTask::new(scene, cameras);
    task.train_size = (args.size, args.size);
    let t = args.test_size.unwrap_or(args.size);
    task.test_size = (t, t);
    task.secondary_fraction = args.secondary_fraction;
    task.noise_sd = args.noise;
    Ok(task)
}

fn file_stem(index: usize, camera: &str) -> String {
    let clean: String = camera
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    format!("{index}-{clean}")
}

pub fn run(args: &GenDataArgs) -> Result<(), CliError> {
    let task = if args.reference {
        reference_task(args.seed)?
    } else {
        task_from_flags(args)?
    };
    let data = task.build()?;
    let mut out = Outputs::new();
    out.dir(&args.out)?;
    let mut entries = Vec::new();
    for (i, cam) in data.cameras.iter().enumerate() {
        for (split, cube) in [(Split::Train, &data.train[i]), (Split::Test, &data.test[i])] {
            let stem = format!(
                "{}-{}",
                file_stem(i, cam.name()),
                match split {
                    Split::Train => "train",
                    Split::Test => "test",
                }
            );
            let cube_name = format!("{stem}.cube");
            let labels_name = format!("{stem}.labels");
            let cube_path = args.out.join(&cube_name);
            out.claim(&cube_path);
            out.claim(&args.out.join(&labels_name));
            write_cube(&cube_path, cube, Some(&labels_name))?;
            println!(
                "{:<5} {:<16} {}x{}x{} -> {cube_name}",
                match split {
                    Split::Train => "train",
                    Split::Test => "test",
                },
                cam.name(),
                cube.height(),
                cube.width(),
                cube.channels()
            );
            entries.push(Entry {
                camera: cam.name().into(),
                split,
                cube: cube_name,
                labels: labels_name,
            });
        }
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        classes: data.classes,
        task,
        cameras: data.cameras.clone(),
        entries,
    };
    out.write(&args.out.join("manifest.json"), manifest.to_json())?;
    println!(
        "manifest {} ({} cameras x 2 splits)",
        args.out.join("manifest.json").display(),
        data.cameras.len()
    );
    out.commit();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_specs() {
        assert_eq!(parse_camera("specim").unwrap().channels(), 224);
        assert_eq!(parse_camera("corning").unwrap().channels(), 249);
        let s = parse_camera("subset:3:1").unwrap();
        assert_eq!(s.channels(), 75);
        assert_eq!(s.name(), "specim/3:1");
        assert_eq!(
            parse_camera("linspace:400:700:4").unwrap().wavelengths(),
            [400.0, 500.0, 600.0, 700.0]
        );
        for bad in [
            "nikon",
            "subset:0:0",
            "subset:2",
            "linspace:700:400:3",
            "subset:a:0",
        ] {
            assert!(
                matches!(parse_camera(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }
}
