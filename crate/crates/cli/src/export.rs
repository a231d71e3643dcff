use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use hyve::checkpoint::Checkpoint;
use hyve::train::trajectory_from_csv;
use hyve::wroi::{density_overlap, peak_density, WroiSnapshot};

use crate::outputs::Outputs;
use crate::svg::{line_chart, Series};
use crate::CliError;

/// Pairs overlapping by more than this are flagged as candidates for a
/// smaller G.
pub const OVERLAP_FLAG: f64 = 0.5;

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// WROI trajectory CSV; defaults to trajectory.csv next to the model
    /// when that file exists.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Export is deterministic; the seed is accepted for uniformity.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn trajectory_chart(rows: &[WroiSnapshot], variance: bool) -> String {
    let g = rows.iter().map(|r| r.wroi + 1).max().unwrap_or(0);
    let series: Vec<Series> = (0..g)
        .map(|k| Series {
            name: format!("WROI {k}"),
            points: rows
                .iter()
                .filter(|r| r.wroi == k)
                .map(|r| {
                    let y = if variance { r.variance_nm2 } else { r.mean_nm };
                    (r.epoch as f64, y)
                })
                .collect(),
        })
        .collect();
    if variance {
        line_chart(
            "WROI variance over training",
            "epoch",
            "variance (nm²)",
            &series,
        )
    } else {
        line_chart("WROI mean over training", "epoch", "mean (nm)", &series)
    }
}

pub fn run(args: &ExportArgs) -> Result<(), CliError> {
    let ck = Checkpoint::load(&args.model)
        .map_err(|e| CliError::Failed(format!("{}: {e}", args.model.display())))?;
    let layer = ck.model.hyve_layer().ok_or_else(|| {
        CliError::Usage(format!(
            "{} has a {} first layer; filters exist only for hyve and hyve++",
            args.model.display(),
            ck.model.config().first_layer.label()
        ))
    })?;
    let trajectory_path = args.trajectory.clone().or_else(|| {
        let sibling = args.model.with_file_name("trajectory.csv");
        sibling.is_file().then_some(sibling)
    });
    let trajectory = match &trajectory_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            Some(
                trajectory_from_csv(&text)
                    .map_err(|e| CliError::Failed(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };

    let means = layer.wrois().means().to_vec();
    let variances = layer.wrois().variances();
    let mut filters = String::from("wroi,mean_nm,variance_nm2,peak_density\n");
    println!("WROI  mean_nm     variance_nm2   peak_density");
    for (k, (&m, &v)) in means.iter().zip(&variances).enumerate() {
        let peak = peak_density(v)?;
        writeln!(filters, "{k},{m},{v},{peak}").expect("String write");
        println!("{k:<5} {m:<11.3} {v:<14.3} {peak:.6e}");
    }
    let mut overlap = String::from("wroi_a,wroi_b,overlap,flagged\n");
    let mut flagged = Vec::new();
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let o = density_overlap(means[a], variances[a], means[b], variances[b])?;
            let flag = o > OVERLAP_FLAG;
            writeln!(overlap, "{a},{b},{o:e},{flag}").expect("String write");
            if flag {
                flagged.push(format!("{a}-{b} ({o:.3})"));
            }
        }
    }
    if flagged.is_empty() {
        println!("no WROI pair overlaps by more than 50%");
    } else {
        println!(
            "WROI pairs overlapping by more than 50%: {}; a smaller G may suffice",
            flagged.join(", ")
        );
    }

    let mut out = Outputs::new();
    out.dir(&args.out)?;
    out.write(&args.out.join("filters.csv"), filters)?;
    out.write(&args.out.join("overlap.csv"), overlap)?;
    if let Some(rows) = &trajectory {
        out.write(
            &args.out.join("trajectory.csv"),
            hyve::train::trajectory_to_csv(rows),
        )?;
        out.write(
            &args.out.join("trajectory_means.svg"),
            trajectory_chart(rows, false),
        )?;
        out.write(
            &args.out.join("trajectory_variances.svg"),
            trajectory_chart(rows, true),
        )?;
        println!("trajectory: {} rows", rows.len());
    }
    out.commit();
    Ok(())
}
