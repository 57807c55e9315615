use std::path::{Path, PathBuf};

use clap::Args;
use geoseg_core::coco::{building_categories, serialize_dataset, DatasetDoc, ImageRecord, Instance};
use geoseg_core::geometry::{Connectivity, PixelMask, ProbabilityMap};
use geoseg_core::preprocess::{semantic_to_instances, SemanticInput, SemanticParams};
use serde_json::json;

use super::{stamp, OutArgs};
use crate::config::PipelineConfig;
use crate::error::{operational, usage, CliResult};
use crate::run::Run;

const MAP_EXTENSIONS: &[&str] = &["png", "tif", "tiff"];

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    /// Directory of single-channel semantic maps named `<image id>.png` or
    /// `<image id>.tif`.
    #[arg(long, short, value_name = "DIR")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Odd adaptive-threshold window [semantic.window].
    #[arg(long)]
    pub window: Option<u32>,
    /// Subtracted from the local mean [semantic.offset].
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    /// 4 or 8 [semantic.connectivity].
    #[arg(long)]
    pub connectivity: Option<u8>,
    /// Smallest kept component in pixels [semantic.min_area].
    #[arg(long)]
    pub min_area: Option<u64>,
}

struct Converted {
    record: ImageRecord,
    masks: Vec<PixelMask>,
}

fn convert_one(path: &Path, bytes: &[u8], params: &SemanticParams) -> Result<Converted, String> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let id: u64 = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| "file name is not an image id".to_string())?;
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let map = ProbabilityMap::from_image(&img).map_err(|e| e.to_string())?;
    let record = ImageRecord::new(id, name, map.width(), map.height());
    let masks = semantic_to_instances(&SemanticInput::Probability(map), params).map_err(|e| e.to_string())?;
    Ok(Converted { record, masks })
}

fn list_maps(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => usage(format!("map directory {} does not exist", dir.display())),
        _ => operational(format!("cannot list {}: {e}", dir.display())),
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| operational(format!("cannot list {}: {e}", dir.display())))?
            .path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| MAP_EXTENSIONS.contains(&e.as_str())) {
            paths.push(path);
        } else {
            log::debug!("skipping {}", path.display());
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn run(args: &ConvertArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.window {
        cfg.semantic.window = v;
    }
    if let Some(v) = args.offset {
        cfg.semantic.offset = v;
    }
    if let Some(v) = args.connectivity {
        cfg.semantic.connectivity =
            Connectivity::from_neighbours(v).ok_or_else(|| usage(format!("--connectivity must be 4 or 8, got {v}")))?;
    }
    if let Some(v) = args.min_area {
        cfg.semantic.min_area = v;
    }
    cfg.validate()?;
    let mut run = Run::new("convert", &cfg, &args.out.out)?;
    let paths = list_maps(&args.input)?;

    let mut converted: Vec<Converted> = Vec::new();
    let mut failures: Vec<(PathBuf, String)> = Vec::new();
    for path in &paths {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                failures.push((path.clone(), e.to_string()));
                continue;
            }
        };
        match convert_one(path, &bytes, &cfg.semantic) {
            Ok(c) if converted.iter().any(|o| o.record.id == c.record.id) => {
                failures.push((path.clone(), format!("duplicate image id {}", c.record.id)));
            }
            Ok(c) => {
                run.record_input("map", path, &bytes);
                converted.push(c);
            }
            Err(e) => failures.push((path.clone(), e)),
        }
    }
    if !failures.is_empty() {
        log::error!("{} of {} maps failed:", failures.len(), paths.len());
        for (path, why) in &failures {
            log::error!("  {}: {why}", path.display());
        }
        if converted.is_empty() {
            return Err(operational(format!("all {} maps failed to convert", paths.len())));
        }
    }

    converted.sort_by_key(|c| c.record.id);
    let mut doc = DatasetDoc {
        categories: building_categories(),
        ..Default::default()
    };
    let mut next_id = 1;
    for c in converted {
        for m in c.masks {
            doc.annotations.push(Instance::from_mask(next_id, c.record.id, 1, m));
            next_id += 1;
        }
        doc.images.push(c.record);
    }
    log::info!("{} maps -> {} instances", doc.images.len(), doc.annotations.len());
    run.note(
        "failed_maps",
        json!(failures
            .iter()
            .map(|(p, _)| p
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()))
            .collect::<Vec<_>>()),
    );
    stamp(&mut doc, &run);
    run.write("dataset.json", &serialize_dataset(&doc))?;
    run.finish()
}
