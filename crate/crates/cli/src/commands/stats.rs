use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use geoseg_core::coco::{DatasetDoc, HeightClassScheme};
use serde_json::json;

use super::{csv_bytes, load_dataset, OutArgs, SampleArgs};
use crate::config::PipelineConfig;
use crate::error::{usage, CliResult};
use crate::run::Run;

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Dataset JSON with per-instance `height_m`.
    #[arg(long, short, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Height histogram bin width in meters [stats.bin_width].
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[command(flatten)]
    pub sample: SampleArgs,
}

pub const CLASS_HEADER: &[&str] = &["class_id", "name", "count"];
pub const HISTOGRAM_HEADER: &[&str] = &["bin_start_m", "bin_end_m", "count"];

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub instances: usize,
    pub missing_height: usize,
    /// `(class id, name, count)` for every class of the scheme.
    pub classes: Vec<(u64, String, usize)>,
    /// Count per bin `[k * width, (k + 1) * width)` from 0 to the highest
    /// occupied bin; empty when no instance has a height.
    pub histogram: Vec<usize>,
}

pub fn compute(doc: &DatasetDoc, scheme: &HeightClassScheme, bin_width: f64) -> CliResult<Stats> {
    let mut classes: Vec<(u64, String, usize)> = scheme.categories().into_iter().map(|c| (c.id, c.name, 0)).collect();
    let mut histogram: Vec<usize> = Vec::new();
    let mut missing_height = 0;
    for a in &doc.annotations {
        let Some(h) = a.height_m else {
            missing_height += 1;
            continue;
        };
        let class = scheme
            .class_of(h)
            .map_err(|e| usage(format!("instance {}: {e}", a.id)))?;
        classes[class as usize - 1].2 += 1;
        let bin = (h / bin_width).floor() as usize;
        if histogram.len() <= bin {
            histogram.resize(bin + 1, 0);
        }
        histogram[bin] += 1;
    }
    Ok(Stats {
        instances: doc.annotations.len(),
        missing_height,
        classes,
        histogram,
    })
}

fn render(stats: &Stats, bin_width: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "instances: {} ({} without height)",
        stats.instances, stats.missing_height
    );
    let _ = writeln!(out, "height classes:");
    let width = stats.classes.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for (_, name, n) in &stats.classes {
        let _ = writeln!(out, "  {name:<width$}  {n}");
    }
    let _ = writeln!(out, "height histogram ({bin_width} m bins):");
    for (k, n) in stats.histogram.iter().enumerate() {
        let label = format!("[{}, {})", k as f64 * bin_width, (k + 1) as f64 * bin_width);
        let _ = writeln!(out, "  {label:<14}  {n}");
    }
    out
}

pub fn run(args: &StatsArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.bin_width {
        cfg.stats_bin_width = v;
    }
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let mut run = Run::new("stats", &cfg, &args.out.out)?;
    let doc = load_dataset(&mut run, "dataset", &args.input)?;
    let doc = args.sample.apply(doc, &mut run);
    let bw = cfg.stats_bin_width;
    let stats = compute(&doc, &scheme, bw)?;
    if stats.missing_height > 0 {
        log::warn!(
            "{} instances have no height_m and are left out of the histogram",
            stats.missing_height
        );
    }
    run.note("instances", json!(stats.instances));

    let classes = csv_bytes(
        CLASS_HEADER,
        stats
            .classes
            .iter()
            .map(|(id, name, n)| vec![id.to_string(), name.clone(), n.to_string()]),
    );
    let histogram = csv_bytes(
        HISTOGRAM_HEADER,
        stats.histogram.iter().enumerate().map(|(k, n)| {
            vec![
                (k as f64 * bw).to_string(),
                ((k + 1) as f64 * bw).to_string(),
                n.to_string(),
            ]
        }),
    );
    let text = render(&stats, bw);
    run.write("class_counts.csv", &classes)?;
    run.write("height_histogram.csv", &histogram)?;
    run.write("stats.txt", text.as_bytes())?;
    run.finish()?;
    print!("{text}");
    Ok(())
}
