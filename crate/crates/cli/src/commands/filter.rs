use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use geoseg_core::coco::{parse_results, serialize_dataset, serialize_results, Instance};
use geoseg_core::quality::{filter_dataset, write_report};
use serde_json::json;

use super::{load_dataset, stamp, OutArgs};
use crate::config::PipelineConfig;
use crate::error::{usage, CliResult};
use crate::run::Run;

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Annotated dataset JSON.
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Reference model detections (COCO results list).
    #[arg(long, value_name = "FILE")]
    pub preds: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// IOU at which an annotation and a detection count as matched
    /// [filter.iou_threshold].
    #[arg(long)]
    pub iou: Option<f64>,
    /// Images whose missing ratio exceeds this are dropped
    /// [filter.discard_ratio].
    #[arg(long)]
    pub discard_ratio: Option<f64>,
    /// Detections below this score are ignored [filter.score_threshold].
    #[arg(long)]
    pub score_threshold: Option<f64>,
}

pub fn run(args: &FilterArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.iou {
        cfg.filter.iou_threshold = v;
    }
    if let Some(v) = args.discard_ratio {
        cfg.filter.discard_ratio = v;
    }
    if let Some(v) = args.score_threshold {
        cfg.filter.score_threshold = v;
    }
    cfg.validate()?;
    let mut run = Run::new("filter", &cfg, &args.out.out)?;
    let doc = load_dataset(&mut run, "gt", &args.gt)?;
    let pred_bytes = run.read_input("preds", &args.preds)?;
    let preds = parse_results(&pred_bytes, &doc).map_err(|e| usage(format!("{}: {e}", args.preds.display())))?;

    let (mut kept, report) = filter_dataset(&doc, &preds, &cfg.filter).map_err(|e| usage(e.to_string()))?;
    let discarded = report.iter().filter(|s| s.discard).count();
    log::info!("kept {} of {} images", report.len() - discarded, report.len());
    run.note("discarded_images", json!(discarded));

    let kept_ids: HashSet<u64> = kept.images.iter().map(|i| i.id).collect();
    let kept_preds: Vec<Instance> = preds.into_iter().filter(|p| kept_ids.contains(&p.image_id)).collect();

    let mut csv = Vec::new();
    write_report(&report, &mut csv).map_err(|e| usage(e.to_string()))?;
    stamp(&mut kept, &run);
    run.write("dataset.json", &serialize_dataset(&kept))?;
    run.write("predictions.json", &serialize_results(&kept_preds))?;
    run.write("filter_report.csv", &csv)?;
    run.finish()
}
