use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hyve::camera::{Alignment, CameraDescriptor, Normalization, Preprocessing};
use hyve::checkpoint::Checkpoint;
use hyve::nets::{FirstLayerKind, Model, ModelConfig};
use hyve::train::{train, Dataset, TrainConfig};

use crate::manifest::{self, Split};
use crate::outputs::Outputs;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Conv2d,
    Ds,
    Hyve,
    #[value(name = "hyve++")]
    HyvePlusPlus,
}

impl ArchArg {
    fn kind(self) -> FirstLayerKind {
        match self {
            ArchArg::Conv2d => FirstLayerKind::Conv2D,
            ArchArg::Ds => FirstLayerKind::DepthwiseSeparable,
            ArchArg::Hyve => FirstLayerKind::Hyve,
            ArchArg::HyvePlusPlus => FirstLayerKind::HyvePlusPlus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PreprocArg {
    None,
    Interp,
    Zeropad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Snv,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::None => Normalization::None,
            NormalizeArg::Snv => Normalization::Snv,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset manifest written by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "hyve++")]
    pub arch: ArchArg,
    /// Number of WROIs.
    #[arg(long, default_value_t = 5)]
    pub g: usize,
    /// Keeps WROI means and variances at their initial values.
    #[arg(long)]
    pub freeze_gaussians: bool,
    /// Channel alignment for conv2d and ds; hyve kinds need none.
    #[arg(long, value_enum, default_value = "none")]
    pub preproc: PreprocArg,
    /// Per-pixel intensity normalization, applied before alignment.
    #[arg(long, value_enum, default_value = "snv")]
    pub normalize: NormalizeArg,
    /// First-layer width followed by one width per separable block.
    #[arg(long, value_delimiter = ',', default_value = "25,30,50")]
    pub widths: Vec<usize>,
    /// Initial WROI standard deviation as a fraction of (w_max - w_min)/G.
    /// Without it the variance starts at (w_max - w_min)/G².
    #[arg(long)]
    pub initial_sd_fraction: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Step size of the WROI means, in nm.
    #[arg(long, default_value_t = 0.3)]
    pub mean_lr: f64,
    /// Step size of the raw WROI variances, relative to their initial mean.
    #[arg(long, default_value_t = 1e-3)]
    pub variance_lr: f64,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for model.ckpt, history.csv and trajectory.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// The preprocessing an architecture needs, or the usage error explaining
/// why the combination is invalid.
fn preprocessing(
    args: &TrainArgs,
    cameras: &[CameraDescriptor],
) -> Result<Preprocessing, CliError> {
    let aware = args.arch.kind().is_wavelength_aware();
    let alignment = match (aware, args.preproc) {
        (true, PreprocArg::None) => Alignment::None,
        (true, _) => {
            return Err(CliError::Usage(
                "hyve and hyve++ read the camera wavelengths directly and require --preproc none"
                    .into(),
            ))
        }
        (false, PreprocArg::None) => {
            if cameras
                .windows(2)
                .any(|w| w[0].wavelengths() != w[1].wavelengths())
            {
                return Err(CliError::Usage(
                    "conv2d and ds index channels by position; mixed cameras need --preproc interp or zeropad"
                        .into(),
                ));
            }
            Alignment::None
        }
        (false, PreprocArg::Interp) => Alignment::Interpolate {
            target: cameras[0].clone(),
        },
        (false, PreprocArg::Zeropad) => Alignment::ZeroPad {
            channels: cameras.iter().map(|c| c.channels()).max().unwrap_or(0),
        },
    };
    if args.freeze_gaussians && !aware {
        return Err(CliError::Usage(
            "--freeze-gaussians applies to hyve and hyve++ only".into(),
        ));
    }
    Ok(Preprocessing::new(args.normalize.into(), alignment))
}

pub fn union_range(cameras: &[CameraDescriptor]) -> (f64, f64) {
    cameras
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.range().0), hi.max(c.range().1))
        })
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let data = manifest::load(&args.data)?;
    let train_cubes = data.cubes(Split::Train, None)?;
    if train_cubes.is_empty() {
        return Err(CliError::Usage(
            "the manifest lists no training cubes".into(),
        ));
    }
    let cameras: Vec<CameraDescriptor> = data
        .manifest
        .cameras
        .iter()
        .filter(|c| train_cubes.iter().any(|t| t.camera().name() == c.name()))
        .cloned()
        .collect();
    let pre = preprocessing(args, &cameras)?;

    let mut mc = ModelConfig::new(args.arch.kind(), data.manifest.classes);
    mc.g = args.g;
    mc.widths = args.widths.clone();
    mc.seed = args.seed;
    if mc.first_layer.is_wavelength_aware() {
        let range = union_range(&cameras);
        mc.wavelength_range = range;
        mc.initial_variance = args.initial_sd_fraction.map(|f| {
            let sd = f * (range.1 - range.0) / args.g.max(1) as f64;
            sd * sd
        });
    } else {
        mc.in_channels = Some(pre.output_channels().unwrap_or(cameras[0].channels()));
    }
    let mut model = Model::build(&mc)?;
    let tc = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        mean_learning_rate: args.mean_lr,
        variance_learning_rate: args.variance_lr,
        seed: args.seed,
        freeze_gaussians: args.freeze_gaussians,
        patch_size: args.patch,
        ..TrainConfig::default()
    };
    tc.validate()?;
    let train_set = Dataset::from_cubes(&train_cubes, args.patch, &pre)?;
    let test_cubes = data.cubes(Split::Test, None)?;
    let test_set = if test_cubes.is_empty() {
        None
    } else {
        Some(Dataset::from_cubes(&test_cubes, args.patch, &pre)?)
    };
    let history = train(&mut model, &train_set, test_set.as_ref(), &tc)?;

    let mut out = Outputs::new();
    out.dir(&args.out)?;
    let ck = Checkpoint {
        model,
        preprocessing: pre,
        cameras,
    };
    out.write(&args.out.join("model.ckpt"), ck.to_bytes()?)?;
    out.write(&args.out.join("history.csv"), history.to_csv())?;
    if ck.model.kind().is_wavelength_aware() {
        out.write(&args.out.join("trajectory.csv"), history.trajectory_csv())?;
    }
    let epochs = history.epochs();
    println!(
        "trained {} on {} patches for {epochs} epochs",
        ck.model.config().first_layer.label(),
        train_set.len()
    );
    if let Some(loss) = history.loss(epochs) {
        println!("final train loss {loss:.6}");
    }
    if let Some(m) = &history.final_train {
        println!("train OA {:.4}", m.oa);
    }
    if let Some(m) = &history.final_test {
        println!("test  OA {:.4} AA {:.4} kappa {:.4}", m.oa, m.aa, m.kappa);
    }
    println!("wrote {}", args.out.join("model.ckpt").display());
    out.commit();
    Ok(())
}
