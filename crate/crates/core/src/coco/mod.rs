//! COCO-style corpora with a per-instance building height.
//!
//! Heights live in the non-standard `attributes.height_m` field of each
//! annotation; `category_id` independently carries the height class. Masks
//! may arrive as polygons, uncompressed RLE or compressed RLE strings and are
//! always written back as polygons or uncompressed RLE.

mod scheme;
mod validate;
mod wire;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{rasterize, GeometryError, PixelMask, Polygon};

pub use scheme::HeightClassScheme;
pub use validate::validate_dataset;
pub use wire::{
    parse_dataset, parse_dataset_report, parse_results, serialize_dataset, serialize_results, ParseOptions,
};

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("JSON parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed with {} error(s):\n{}", count_errors(.0), render_findings(.0))]
    Validation(Vec<Finding>),
    #[error("instance {id}: {source}")]
    Geometry { id: u64, source: GeometryError },
    #[error("instance {instance} belongs to image {expected}, not image {actual}")]
    ImageMismatch { instance: u64, expected: u64, actual: u64 },
    #[error("invalid height class scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid height {0} m: heights must be finite and non-negative")]
    InvalidHeight(f64),
}

pub type Result<T> = std::result::Result<T, CocoError>;

fn count_errors(findings: &[Finding]) -> usize {
    findings.iter().filter(|f| f.severity == Severity::Error).count()
}

fn render_findings(findings: &[Finding]) -> String {
    findings.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub entity: String,
    pub message: String,
}

impl Finding {
    pub fn error(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            entity: entity.into(),
            message: message.into(),
        }
    }

    pub fn warning(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            entity: entity.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    /// `SEVERITY<TAB>entity<TAB>message`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        };
        write!(f, "{sev}\t{}\t{}", self.entity, self.message)
    }
}

/// Renders findings as the line-oriented validation report.
pub fn validation_report(findings: &[Finding]) -> String {
    let mut out = String::new();
    for f in findings {
        out.push_str(&f.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Identifier of the full-resolution scene a tile was cut from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_scene: Option<String>,
    /// `(row, col)` of the tile in its scene grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_origin: Option<(u32, u32)>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ImageRecord {
    pub fn new(id: u64, file_name: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            id,
            file_name: file_name.into(),
            width,
            height,
            source_scene: None,
            tile_origin: None,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Category {
    pub fn new(id: u64, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Polygon(Polygon),
    Mask(PixelMask),
}

/// An annotation or a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `None` only for box-only predictions.
    pub geometry: Option<Geometry>,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub area: f64,
    pub height_m: Option<f64>,
    pub score: Option<f64>,
    /// Members of `attributes` other than `height_m`.
    pub attributes: BTreeMap<String, Value>,
    pub extra: BTreeMap<String, Value>,
}

impl Instance {
    /// Ground-truth instance from a mask, with bbox and area derived from it.
    pub fn from_mask(id: u64, image_id: u64, category_id: u64, mask: PixelMask) -> Self {
        let bbox = mask.bbox().map(|b| b.as_xywh()).unwrap_or([0.0; 4]);
        Self {
            id,
            image_id,
            category_id,
            area: mask.area() as f64,
            bbox,
            geometry: Some(Geometry::Mask(mask)),
            height_m: None,
            score: None,
            attributes: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_height(mut self, height_m: f64) -> Self {
        self.height_m = Some(height_m);
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    /// Rasterizes or decodes the geometry at the given image size.
    pub fn mask_at(&self, width: u32, height: u32) -> Result<PixelMask> {
        let geometry_err = |source| CocoError::Geometry { id: self.id, source };
        match &self.geometry {
            Some(Geometry::Polygon(p)) => rasterize(p, width, height).map_err(geometry_err),
            Some(Geometry::Mask(m)) if m.dims() == (width, height) => Ok(m.clone()),
            Some(Geometry::Mask(m)) => Err(geometry_err(GeometryError::DimensionMismatch {
                left_width: m.width(),
                left_height: m.height(),
                right_width: width,
                right_height: height,
            })),
            None => Err(geometry_err(GeometryError::DegenerateGeometry(
                "instance has no segmentation".into(),
            ))),
        }
    }

    /// Mask of the segmentation, or of the bbox for box-only predictions.
    pub fn region_at(&self, width: u32, height: u32) -> Result<PixelMask> {
        if self.geometry.is_some() {
            return self.mask_at(width, height);
        }
        let [x, y, w, h] = self.bbox;
        match rasterize(&Polygon::rect(x, y, x + w, y + h), width, height) {
            Ok(m) => Ok(m),
            Err(GeometryError::DegenerateGeometry(_)) => {
                PixelMask::empty(width, height).map_err(|source| CocoError::Geometry { id: self.id, source })
            }
            Err(source) => Err(CocoError::Geometry { id: self.id, source }),
        }
    }

    /// Replaces bbox and area with the values measured on `mask`.
    pub fn refresh_extent(&mut self, mask: &PixelMask) {
        self.area = mask.area() as f64;
        self.bbox = mask.bbox().map(|b| b.as_xywh()).unwrap_or([0.0; 4]);
    }
}

/// Rasterizes (polygon) or decodes (RLE) an instance at its image's size.
pub fn instance_to_mask(instance: &Instance, image: &ImageRecord) -> Result<PixelMask> {
    if instance.image_id != image.id {
        return Err(CocoError::ImageMismatch {
            instance: instance.id,
            expected: instance.image_id,
            actual: image.id,
        });
    }
    instance.mask_at(image.width, image.height)
}

/// Uncompressed COCO counts of a mask.
pub fn rle_encode(mask: &PixelMask) -> Vec<u32> {
    mask.runs().to_vec()
}

/// Inverse of [`rle_encode`]; the counts must sum to `width * height`.
pub fn rle_decode(counts: &[u32], width: u32, height: u32) -> std::result::Result<PixelMask, GeometryError> {
    PixelMask::from_runs(width, height, counts)
}

/// A COCO corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetDoc {
    pub info: BTreeMap<String, Value>,
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<Instance>,
    pub categories: Vec<Category>,
    /// Unrecognised top-level members, re-emitted verbatim.
    pub extra: BTreeMap<String, Value>,
}

impl DatasetDoc {
    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Annotations grouped by image id, in annotation order.
    pub fn annotations_by_image(&self) -> BTreeMap<u64, Vec<&Instance>> {
        let mut out: BTreeMap<u64, Vec<&Instance>> = self.images.iter().map(|i| (i.id, Vec::new())).collect();
        for a in &self.annotations {
            out.entry(a.image_id).or_default().push(a);
        }
        out
    }

    pub fn category_name(&self, id: u64) -> Option<&str> {
        self.categories.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }
}

/// Single-class table used for building-footprint pretraining corpora.
pub fn building_categories() -> Vec<Category> {
    vec![Category::new(1, "building")]
}
