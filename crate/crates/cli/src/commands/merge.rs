use std::path::PathBuf;

use clap::Args;
use geoseg_core::coco::serialize_dataset;
use geoseg_core::preprocess::{merge_dataset, MergeGroup};
use serde_json::json;

use super::{csv_bytes, join_ids, load_dataset, stamp, OutArgs};
use crate::config::PipelineConfig;
use crate::error::{usage, CliResult};
use crate::run::Run;

#[derive(Debug, Clone, Args)]
pub struct MergeArgs {
    /// Dataset JSON whose instances all carry `height_m`.
    #[arg(long, short, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Instances merge when their max overlap ratio exceeds this value
    /// [merge.overlap_threshold].
    #[arg(long)]
    pub overlap_threshold: Option<f64>,
}

pub const LOG_HEADER: &[&str] = &["image_id", "kept_id", "height_m", "category_id", "member_ids"];

fn log_csv(groups: &[MergeGroup]) -> Vec<u8> {
    csv_bytes(
        LOG_HEADER,
        groups.iter().map(|g| {
            vec![
                g.image_id.to_string(),
                g.kept_id.to_string(),
                g.height_m.to_string(),
                g.category_id.to_string(),
                join_ids(&g.member_ids),
            ]
        }),
    )
}

pub fn run(args: &MergeArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.overlap_threshold {
        cfg.merge.overlap_threshold = v;
    }
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let mut run = Run::new("merge", &cfg, &args.out.out)?;
    let doc = load_dataset(&mut run, "dataset", &args.input)?;
    if !scheme.matches_categories(&doc.categories) {
        log::warn!(
            "category table differs from the height classes {:?}",
            scheme.class_names()
        );
    }
    let (mut out, groups) = merge_dataset(&doc, &cfg.merge, &scheme).map_err(|e| usage(e.to_string()))?;
    log::info!(
        "{} instances -> {} after merging {} groups",
        doc.annotations.len(),
        out.annotations.len(),
        groups.len()
    );
    run.note("merged_groups", json!(groups.len()));
    stamp(&mut out, &run);
    run.write("dataset.json", &serialize_dataset(&out))?;
    run.write("merge_log.csv", &log_csv(&groups))?;
    run.finish()
}
