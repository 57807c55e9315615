//! JSON wire format: parsing into [`DatasetDoc`] and deterministic output.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::validate::{validate_dataset, validate_predictions};
use super::{
    Category, CocoError, DatasetDoc, Finding, Geometry, HeightClassScheme, ImageRecord, Instance, Result, Severity,
};
use crate::geometry::{PixelMask, Polygon};

#[derive(Debug, Deserialize, Serialize)]
struct RawDoc {
    #[serde(default)]
    info: BTreeMap<String, Value>,
    #[serde(default)]
    images: Vec<ImageRecord>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    categories: Vec<Category>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    image_id: u64,
    category_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<RawSegmentation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<BTreeMap<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawSegmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [u32; 2], counts: RawCounts },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawCounts {
    Uncompressed(Vec<u32>),
    Compressed(String),
}

/// Knobs for [`parse_dataset_report`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Scheme used to cross-check `category_id` against `height_m`.
    pub scheme: Option<HeightClassScheme>,
    /// Overwrite stored bbox/area with the rasterized values instead of
    /// validating them.
    pub recompute_extent: bool,
}

fn parse_error(bytes: &[u8], err: serde_json::Error) -> CocoError {
    let (line, column) = (err.line(), err.column());
    let offset = if line == 0 {
        0
    } else {
        let line_start: usize = bytes.split(|&b| b == b'\n').take(line - 1).map(|l| l.len() + 1).sum();
        (line_start + column.saturating_sub(1)).min(bytes.len())
    };
    CocoError::Parse {
        offset,
        line,
        column,
        message: err.to_string(),
    }
}

fn geometry_of(raw: Option<RawSegmentation>, entity: &str, findings: &mut Vec<Finding>) -> Option<Geometry> {
    match raw? {
        RawSegmentation::Polygons(rings) if rings.is_empty() => None,
        RawSegmentation::Polygons(rings) => {
            if rings.iter().any(|r| r.len() % 2 != 0) {
                findings.push(Finding::error(entity, "polygon ring has an odd number of coordinates"));
            }
            Some(Geometry::Polygon(Polygon::from_flat(&rings)))
        }
        RawSegmentation::Rle { size: [h, w], counts } => {
            let mask = match counts {
                RawCounts::Uncompressed(c) => PixelMask::from_runs(w, h, &c),
                RawCounts::Compressed(s) => PixelMask::from_coco_string(w, h, &s),
            };
            match mask {
                Ok(m) => Some(Geometry::Mask(m)),
                Err(e) => {
                    findings.push(Finding::error(entity, format!("invalid RLE segmentation: {e}")));
                    None
                }
            }
        }
    }
}

fn instance_from_raw(
    raw: RawAnnotation,
    id: u64,
    images: &HashMap<u64, &ImageRecord>,
    findings: &mut Vec<Finding>,
) -> Instance {
    let entity = format!("annotation {id}");
    let geometry = geometry_of(raw.segmentation, &entity, findings);
    let mut attributes = raw.attributes.unwrap_or_default();
    let height_m = match attributes.remove("height_m") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => n.as_f64(),
        Some(other) => {
            findings.push(Finding::error(
                &entity,
                format!("attributes.height_m must be a number, got {other}"),
            ));
            None
        }
    };
    let mut inst = Instance {
        id,
        image_id: raw.image_id,
        category_id: raw.category_id,
        geometry,
        bbox: raw.bbox.unwrap_or([0.0; 4]),
        area: raw.area.unwrap_or(0.0),
        height_m,
        score: raw.score,
        attributes,
        extra: raw.extra,
    };
    if raw.bbox.is_none() || raw.area.is_none() {
        fill_extent(&mut inst, images, raw.bbox.is_none(), raw.area.is_none());
    }
    inst
}

fn fill_extent(inst: &mut Instance, images: &HashMap<u64, &ImageRecord>, bbox: bool, area: bool) {
    let measured = images
        .get(&inst.image_id)
        .and_then(|img| inst.mask_at(img.width, img.height).ok());
    match measured {
        Some(mask) => {
            let (old_bbox, old_area) = (inst.bbox, inst.area);
            inst.refresh_extent(&mask);
            if !bbox {
                inst.bbox = old_bbox;
            }
            if !area {
                inst.area = old_area;
            }
        }
        None if area && inst.geometry.is_none() => {
            inst.area = inst.bbox[2] * inst.bbox[3];
        }
        None => {}
    }
}

/// Parses and validates a corpus; errors carry every finding.
pub fn parse_dataset(bytes: &[u8]) -> Result<DatasetDoc> {
    let (doc, findings) = parse_dataset_report(bytes, &ParseOptions::default())?;
    for f in findings {
        log::warn!("{f}");
    }
    Ok(doc)
}

/// Like [`parse_dataset`] but returns non-fatal findings alongside the
/// document.
pub fn parse_dataset_report(bytes: &[u8], opts: &ParseOptions) -> Result<(DatasetDoc, Vec<Finding>)> {
    let raw: RawDoc = serde_json::from_slice(bytes).map_err(|e| parse_error(bytes, e))?;
    let mut findings = Vec::new();
    let images: HashMap<u64, &ImageRecord> = raw.images.iter().map(|i| (i.id, i)).collect();
    let mut annotations = Vec::with_capacity(raw.annotations.len());
    for (idx, a) in raw.annotations.into_iter().enumerate() {
        let id = match a.id {
            Some(id) => id,
            None => {
                findings.push(Finding::error(format!("annotation #{idx}"), "annotation has no id"));
                0
            }
        };
        annotations.push(instance_from_raw(a, id, &images, &mut findings));
    }
    if opts.recompute_extent {
        for a in &mut annotations {
            fill_extent(a, &images, true, true);
        }
    }
    let doc = DatasetDoc {
        info: raw.info,
        images: raw.images,
        annotations,
        categories: raw.categories,
        extra: raw.extra,
    };
    findings.extend(validate_dataset(&doc, opts.scheme.as_ref()));
    if findings.iter().any(|f| f.severity == Severity::Error) {
        return Err(CocoError::Validation(findings));
    }
    Ok((doc, findings))
}

/// Parses a COCO results file (a JSON list of scored detections) and checks
/// it against the ground-truth corpus it refers to.
///
/// Detections without an `id` are numbered by their position, from 1.
pub fn parse_results(bytes: &[u8], gt: &DatasetDoc) -> Result<Vec<Instance>> {
    let raw: Vec<RawAnnotation> = serde_json::from_slice(bytes).map_err(|e| parse_error(bytes, e))?;
    let images: HashMap<u64, &ImageRecord> = gt.images.iter().map(|i| (i.id, i)).collect();
    let mut findings = Vec::new();
    let preds: Vec<Instance> = raw
        .into_iter()
        .enumerate()
        .map(|(idx, a)| {
            let id = a.id.unwrap_or(idx as u64 + 1);
            instance_from_raw(a, id, &images, &mut findings)
        })
        .collect();
    findings.extend(validate_predictions(&preds, gt));
    if findings.iter().any(|f| f.severity == Severity::Error) {
        return Err(CocoError::Validation(findings));
    }
    Ok(preds)
}

fn raw_from_instance(inst: &Instance, with_id: bool) -> RawAnnotation {
    let segmentation = inst.geometry.as_ref().map(|g| match g {
        Geometry::Polygon(p) => RawSegmentation::Polygons(p.to_flat()),
        Geometry::Mask(m) => RawSegmentation::Rle {
            size: [m.height(), m.width()],
            counts: RawCounts::Uncompressed(m.runs().to_vec()),
        },
    });
    let mut attributes = inst.attributes.clone();
    if let Some(h) = inst.height_m {
        attributes.insert("height_m".into(), Value::from(h));
    }
    RawAnnotation {
        id: with_id.then_some(inst.id),
        image_id: inst.image_id,
        category_id: inst.category_id,
        segmentation,
        bbox: Some(inst.bbox),
        area: Some(inst.area),
        attributes: (!attributes.is_empty()).then_some(attributes),
        score: inst.score,
        extra: inst.extra.clone(),
    }
}

fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory JSON serialization");
    out.push(b'\n');
    out
}

/// Pretty-printed JSON with a fixed member order; RLE is always
/// uncompressed.
pub fn serialize_dataset(doc: &DatasetDoc) -> Vec<u8> {
    let raw = RawDoc {
        info: doc.info.clone(),
        images: doc.images.clone(),
        annotations: doc.annotations.iter().map(|a| raw_from_instance(a, true)).collect(),
        categories: doc.categories.clone(),
        extra: doc.extra.clone(),
    };
    to_pretty(&raw)
}

/// COCO results list.
pub fn serialize_results(preds: &[Instance]) -> Vec<u8> {
    let raw: Vec<RawAnnotation> = preds.iter().map(|p| raw_from_instance(p, true)).collect();
    to_pretty(&raw)
}
