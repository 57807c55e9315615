//! Grid tiling of large scenes into fixed-size chips.

use std::path::Path;

use image::{DynamicImage, GenericImage, GenericImageView, Rgba};
use rayon::prelude::*;

use crate::coco::{DatasetDoc, Geometry, ImageRecord, Instance};
use crate::geometry::PixelMask;

use super::{PreprocessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TileSpec {
    pub tile_size: u32,
    /// A clipped fragment is kept when its area is at least this fraction of
    /// the instance's full area.
    pub min_clipped_area_ratio: f64,
    /// Fill value for the padded part of edge tiles.
    pub pad_value: u8,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self {
            tile_size: 512,
            min_clipped_area_ratio: 0.25,
            pad_value: 0,
        }
    }
}

impl TileSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(PreprocessError::InvalidConfig("tile_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_clipped_area_ratio) {
            return Err(PreprocessError::InvalidConfig(format!(
                "min_clipped_area_ratio {} must be in [0, 1]",
                self.min_clipped_area_ratio
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of the grid covering a `width x height` image.
    pub fn grid(&self, width: u32, height: u32) -> (u32, u32) {
        (height.div_ceil(self.tile_size), width.div_ceil(self.tile_size))
    }
}

/// One row of the tile manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileManifestEntry {
    pub tile_id: u64,
    pub file_name: String,
    pub source_image_id: u64,
    pub source_file_name: String,
    pub source_scene: String,
    pub row: u32,
    pub col: u32,
    /// Pixel offset of the tile's top-left corner in the source image.
    pub x0: u32,
    pub y0: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiledDataset {
    pub doc: DatasetDoc,
    pub manifest: Vec<TileManifestEntry>,
}

/// File name of tile `(row, col)` cut from `source`.
pub fn tile_file_name(source: &str, row: u32, col: u32) -> String {
    let path = Path::new(source);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string());
    let name = format!("{stem}_r{row:03}_c{col:03}.png");
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => format!("{}/{name}", p.to_string_lossy()),
        _ => name,
    }
}

struct TileOut {
    record: ImageRecord,
    entry: TileManifestEntry,
    fragments: Vec<Instance>,
}

fn fragment_kept(fragment_area: u64, original_area: u64, ratio: f64) -> bool {
    fragment_area > 0 && (fragment_area >= original_area || fragment_area as f64 >= ratio * original_area as f64)
}

fn tile_image(img: &ImageRecord, instances: &[&Instance], spec: &TileSpec) -> Result<Vec<TileOut>> {
    let ts = spec.tile_size;
    let (rows, cols) = spec.grid(img.width, img.height);
    let masks: Vec<PixelMask> = instances
        .iter()
        .map(|inst| crate::coco::instance_to_mask(inst, img))
        .collect::<std::result::Result<_, _>>()?;
    let scene = img.source_scene.clone().unwrap_or_else(|| img.file_name.clone());
    let identity = rows == 1 && cols == 1 && img.width == ts && img.height == ts;

    let mut out: Vec<TileOut> = Vec::with_capacity((rows * cols) as usize);
    for row in 0..rows {
        for col in 0..cols {
            let file_name = tile_file_name(&img.file_name, row, col);
            let mut record = ImageRecord::new(0, file_name.clone(), ts, ts);
            record.source_scene = Some(scene.clone());
            record.tile_origin = Some((row, col));
            out.push(TileOut {
                entry: TileManifestEntry {
                    tile_id: 0,
                    file_name,
                    source_image_id: img.id,
                    source_file_name: img.file_name.clone(),
                    source_scene: scene.clone(),
                    row,
                    col,
                    x0: col * ts,
                    y0: row * ts,
                },
                record,
                fragments: Vec::new(),
            });
        }
    }

    for (inst, mask) in instances.iter().zip(&masks) {
        let Some(bb) = mask.bbox() else { continue };
        let original = mask.area();
        let (r0, r1) = (bb.y / ts, (bb.y + bb.height - 1) / ts);
        let (c0, c1) = (bb.x / ts, (bb.x + bb.width - 1) / ts);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let tile = &mut out[(row * cols + col) as usize];
                let fragment = if identity {
                    mask.clone()
                } else {
                    mask.crop(col * ts, row * ts, ts, ts)?
                };
                if !fragment_kept(fragment.area(), original, spec.min_clipped_area_ratio) {
                    continue;
                }
                let mut piece = (*inst).clone();
                piece.refresh_extent(&fragment);
                if !identity {
                    piece.geometry = Some(Geometry::Mask(fragment));
                }
                tile.fragments.push(piece);
            }
        }
    }
    Ok(out)
}

/// Cuts every image of `doc` into `tile_size` chips on a grid anchored at the
/// origin.
///
/// Tiles are numbered in (source image id, row, col) order; kept fragments
/// are numbered in tile order, then source annotation order.
pub fn tile_dataset(doc: &DatasetDoc, spec: &TileSpec) -> Result<TiledDataset> {
    spec.validate()?;
    if let Some(orphan) = doc.annotations.iter().find(|a| doc.image(a.image_id).is_none()) {
        return Err(PreprocessError::UnknownImage(orphan.image_id));
    }
    let by_image = doc.annotations_by_image();
    let mut images: Vec<&ImageRecord> = doc.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let per_image: Vec<Vec<TileOut>> = images
        .par_iter()
        .map(|img| tile_image(img, by_image.get(&img.id).map_or(&[][..], |v| v), spec))
        .collect::<Result<_>>()?;

    let mut out = DatasetDoc {
        info: doc.info.clone(),
        categories: doc.categories.clone(),
        extra: doc.extra.clone(),
        ..Default::default()
    };
    let mut manifest = Vec::new();
    let (mut next_tile, mut next_ann) = (1u64, 1u64);
    for tile in per_image.into_iter().flatten() {
        let TileOut {
            mut record,
            mut entry,
            fragments,
        } = tile;
        record.id = next_tile;
        entry.tile_id = next_tile;
        for mut f in fragments {
            f.id = next_ann;
            f.image_id = next_tile;
            next_ann += 1;
            out.annotations.push(f);
        }
        out.images.push(record);
        manifest.push(entry);
        next_tile += 1;
    }
    Ok(TiledDataset { doc: out, manifest })
}

/// Pixels of tile `(x0, y0)` of `img`, padded with `pad_value` where the tile
/// extends past the image.
pub fn cut_tile_image(img: &DynamicImage, x0: u32, y0: u32, tile_size: u32, pad_value: u8) -> DynamicImage {
    let (w, h) = img.dimensions();
    let cw = w.saturating_sub(x0).min(tile_size);
    let ch = h.saturating_sub(y0).min(tile_size);
    if cw == tile_size && ch == tile_size {
        return img.crop_imm(x0, y0, tile_size, tile_size);
    }
    let mut canvas = DynamicImage::new(tile_size, tile_size, img.color());
    if pad_value != 0 {
        let fill = Rgba([pad_value, pad_value, pad_value, 255]);
        for y in 0..tile_size {
            for x in 0..tile_size {
                if x >= cw || y >= ch {
                    canvas.put_pixel(x, y, fill);
                }
            }
        }
    }
    if cw > 0 && ch > 0 {
        canvas
            .copy_from(&img.crop_imm(x0, y0, cw, ch), 0, 0)
            .expect("crop fits in tile");
    }
    canvas
}
