use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use clap::Args;
use geoseg_core::coco::{serialize_dataset, DatasetDoc};
use geoseg_core::preprocess::{cut_tile_image, tile_dataset, TileManifestEntry, TileSpec};
use image::ImageFormat;

use super::{csv_bytes, load_dataset, stamp, OutArgs, SampleArgs};
use crate::config::PipelineConfig;
use crate::error::{operational, usage, CliResult};
use crate::run::Run;

#[derive(Debug, Clone, Args)]
pub struct TileArgs {
    /// Dataset JSON describing the source scenes.
    #[arg(long, short, value_name = "FILE")]
    pub input: PathBuf,
    /// Directory holding the source images under their `file_name`; when
    /// given, tile images are written to OUT/tiles.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Tile side in pixels [tile.size].
    #[arg(long)]
    pub tile_size: Option<u32>,
    /// Minimum kept fraction of a clipped instance [tile.min_clipped_area_ratio].
    #[arg(long)]
    pub min_clipped_area_ratio: Option<f64>,
    /// Fill value for padding past the scene edge [tile.pad_value].
    #[arg(long)]
    pub pad_value: Option<u8>,
    #[command(flatten)]
    pub sample: SampleArgs,
}

pub const MANIFEST_HEADER: &[&str] = &[
    "tile_id",
    "file_name",
    "source_image_id",
    "source_file_name",
    "source_scene",
    "row",
    "col",
    "x0",
    "y0",
];

fn manifest_csv(manifest: &[TileManifestEntry]) -> Vec<u8> {
    csv_bytes(
        MANIFEST_HEADER,
        manifest.iter().map(|e| {
            vec![
                e.tile_id.to_string(),
                e.file_name.clone(),
                e.source_image_id.to_string(),
                e.source_file_name.clone(),
                e.source_scene.clone(),
                e.row.to_string(),
                e.col.to_string(),
                e.x0.to_string(),
                e.y0.to_string(),
            ]
        }),
    )
}

fn write_tile_images(
    run: &mut Run,
    dir: &Path,
    doc: &DatasetDoc,
    manifest: &[TileManifestEntry],
    spec: &TileSpec,
) -> CliResult<()> {
    let mut by_source: BTreeMap<u64, Vec<&TileManifestEntry>> = BTreeMap::new();
    for e in manifest {
        by_source.entry(e.source_image_id).or_default().push(e);
    }
    for (source_id, tiles) in by_source {
        let record = doc.image(source_id).expect("manifest refers to input images");
        let path = dir.join(&record.file_name);
        let bytes = run.read_input("image", &path)?;
        let img =
            image::load_from_memory(&bytes).map_err(|e| usage(format!("cannot decode {}: {e}", path.display())))?;
        if (img.width(), img.height()) != (record.width, record.height) {
            return Err(usage(format!(
                "{} is {}x{} but image {} declares {}x{}",
                path.display(),
                img.width(),
                img.height(),
                record.id,
                record.width,
                record.height
            )));
        }
        for e in tiles {
            let chip = cut_tile_image(&img, e.x0, e.y0, spec.tile_size, spec.pad_value);
            let mut png = Vec::new();
            chip.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
                .map_err(|err| operational(format!("cannot encode tile {}: {err}", e.file_name)))?;
            run.write(&format!("tiles/{}", e.file_name), &png)?;
        }
    }
    Ok(())
}

pub fn run(args: &TileArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(v) = args.tile_size {
        cfg.tile.tile_size = v;
    }
    if let Some(v) = args.min_clipped_area_ratio {
        cfg.tile.min_clipped_area_ratio = v;
    }
    if let Some(v) = args.pad_value {
        cfg.tile.pad_value = v;
    }
    cfg.validate()?;
    let mut run = Run::new("tile", &cfg, &args.out.out)?;
    let doc = load_dataset(&mut run, "dataset", &args.input)?;
    let doc = args.sample.apply(doc, &mut run);
    let tiled = tile_dataset(&doc, &cfg.tile).map_err(|e| usage(e.to_string()))?;
    log::info!(
        "{} images -> {} tiles, {} instances -> {} fragments",
        doc.images.len(),
        tiled.doc.images.len(),
        doc.annotations.len(),
        tiled.doc.annotations.len()
    );
    if let Some(dir) = &args.images {
        write_tile_images(&mut run, dir, &doc, &tiled.manifest, &cfg.tile)?;
    }
    let mut out = tiled.doc;
    stamp(&mut out, &run);
    run.write("dataset.json", &serialize_dataset(&out))?;
    run.write("manifest.csv", &manifest_csv(&tiled.manifest))?;
    run.finish()
}
