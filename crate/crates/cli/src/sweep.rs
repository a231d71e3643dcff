use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hyve::nets::{FirstLayerKind, ModelConfig};
use hyve::train::{
    mean_oa, run_camera_agnostic_experiment, run_extension_ablation, run_freeze_ablation,
    run_g_sweep, thread_limit, write_summary_csv, Arch, ExperimentConfig, ExperimentRow,
    TrainConfig,
};

use crate::manifest;
use crate::outputs::Outputs;
use crate::train::NormalizeArg;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    G,
    Freeze,
    Extension,
    CameraAgnostic,
}

/// Defaults follow the reference experiment (`gen-data --reference`).
#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub data: PathBuf,
    /// G values of the g experiment.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,8")]
    pub g_values: Vec<usize>,
    /// Architectures of the camera-agnostic experiment: conv2d+zeropad,
    /// conv2d+interp, baseline-ds, hyve, hyve++.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "hyve++,conv2d+zeropad,conv2d+interp"
    )]
    pub archs: Vec<String>,
    /// Seeds of the repeated runs; --seed N runs the single seed N.
    #[arg(long, alias = "seed", value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    pub g: usize,
    #[arg(long, value_delimiter = ',', default_value = "16,16,16")]
    pub widths: Vec<usize>,
    /// Initial WROI standard deviation as a fraction of (w_max - w_min)/G;
    /// 0 keeps the default (w_max - w_min)/G² variance.
    #[arg(long, default_value_t = 0.25)]
    pub initial_sd_fraction: f64,
    #[arg(long, value_enum, default_value = "snv")]
    pub normalize: NormalizeArg,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.3)]
    pub mean_lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub variance_lr: f64,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    /// Summary CSV (experiment,setting,seed,camera,oa,aa,kappa).
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_archs(labels: &[String]) -> Result<Vec<Arch>, CliError> {
    labels
        .iter()
        .map(|l| {
            Arch::from_label(l.trim()).ok_or_else(|| {
                let known: Vec<&str> = Arch::ALL.iter().map(|a| a.label()).collect();
                CliError::Usage(format!(
                    "unknown architecture '{l}'; expected one of {}",
                    known.join(", ")
                ))
            })
        })
        .collect()
}

fn print_table(rows: &[ExperimentRow]) {
    let mut settings: Vec<&str> = Vec::new();
    let mut cameras: Vec<&str> = Vec::new();
    for r in rows {
        if !settings.contains(&r.setting.as_str()) {
            settings.push(&r.setting);
        }
        if !cameras.contains(&r.camera.as_str()) {
            cameras.push(&r.camera);
        }
    }
    print!("{:<16}", "mean OA");
    for c in &cameras {
        print!(" {c:>12}");
    }
    println!();
    for s in &settings {
        print!("{s:<16}");
        for c in &cameras {
            match mean_oa(rows, s, Some(c)) {
                Some(v) => print!(" {v:>12.4}"),
                None => print!(" {:>12}", "-"),
            }
        }
        println!();
    }
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    if args.seeds.is_empty() {
        return Err(CliError::Usage("--seeds lists no seed".into()));
    }
    if args.experiment == Experiment::G && args.g_values.len() < 2 {
        return Err(CliError::Usage(
            "--experiment g needs at least two --g-values".into(),
        ));
    }
    let archs = parse_archs(&args.archs)?;
    if !(args.initial_sd_fraction >= 0.0) {
        return Err(CliError::Usage(
            "--initial-sd-fraction must be non-negative".into(),
        ));
    }
    let data = manifest::load(&args.data)?.task_data()?;

    let mut model = ModelConfig::new(FirstLayerKind::HyvePlusPlus, data.classes);
    model.g = args.g;
    model.widths = args.widths.clone();
    let train = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        mean_learning_rate: args.mean_lr,
        variance_learning_rate: args.variance_lr,
        patch_size: args.patch,
        ..TrainConfig::default()
    };
    train.validate()?;
    let mut cfg = ExperimentConfig::new(model, train);
    cfg.seeds = args.seeds.clone();
    cfg.initial_sd_fraction = (args.initial_sd_fraction > 0.0).then_some(args.initial_sd_fraction);
    cfg.normalization = args.normalize.into();
    cfg.threads = thread_limit();

    let rows = match args.experiment {
        Experiment::G => run_g_sweep(&data, &args.g_values, &cfg)?,
        Experiment::Freeze => run_freeze_ablation(&data, &cfg)?,
        Experiment::Extension => run_extension_ablation(&data, &cfg)?,
        Experiment::CameraAgnostic => run_camera_agnostic_experiment(&data, &archs, &cfg)?,
    };
    print_table(&rows);
    let mut out = Outputs::new();
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out.dir(parent)?;
    }
    out.write(&args.out, write_summary_csv(&rows))?;
    out.commit();
    Ok(())
}
