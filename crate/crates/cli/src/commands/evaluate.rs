use std::path::PathBuf;

use clap::Args;
use geoseg_core::coco::parse_results;
use geoseg_core::evaluation::{map_all, write_matches_csv, GeometryMode};
use serde_json::Value;

use super::{load_dataset, OutArgs};
use crate::config::PipelineConfig;
use crate::error::{operational, usage, CliResult};
use crate::run::Run;

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Ground-truth dataset JSON.
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Scored detections (COCO results list).
    #[arg(long, value_name = "FILE")]
    pub preds: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Overlap geometry: bbox or mask [eval.mode].
    #[arg(long, value_parser = clap::value_parser!(GeometryMode))]
    pub mode: Option<GeometryMode>,
    /// Matching IOU threshold [eval.iou_threshold].
    #[arg(long)]
    pub iou: Option<f64>,
    /// Detections below this score stay out of the confusion matrix
    /// [eval.score_threshold].
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Score with one-to-one matching only [eval.group_matching=false].
    #[arg(long)]
    pub no_group_matching: bool,
}

pub fn run(args: &EvaluateArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.mode {
        cfg.eval.geometry_mode = v;
    }
    if let Some(v) = args.iou {
        cfg.eval.iou_threshold = v;
    }
    if let Some(v) = args.score_threshold {
        cfg.eval.score_threshold = v;
    }
    if args.no_group_matching {
        cfg.eval.enable_group_matching = false;
    }
    cfg.validate()?;
    let mut run = Run::new("evaluate", &cfg, &args.out.out)?;
    let gt = load_dataset(&mut run, "gt", &args.gt)?;
    let pred_bytes = run.read_input("preds", &args.preds)?;
    let preds = parse_results(&pred_bytes, &gt).map_err(|e| usage(format!("{}: {e}", args.preds.display())))?;

    let mut report = map_all(&gt, &preds, &cfg.eval).map_err(|e| usage(e.to_string()))?;
    if let Value::Object(p) = run.provenance() {
        report.provenance = p.into_iter().collect();
    }
    let text = report.to_text();
    let mut matches = Vec::new();
    write_matches_csv(&report.matches, &mut matches).map_err(|e| operational(e.to_string()))?;
    run.write("report.json", &report.to_json())?;
    run.write("report.txt", text.as_bytes())?;
    run.write("matches.csv", &matches)?;
    run.finish()?;
    print!("{text}");
    Ok(())
}
