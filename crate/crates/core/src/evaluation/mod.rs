//! Scoring of predictions against ground truth.
//!
//! Matching runs in two stages per image. Greedy one-to-one matching pairs
//! ground truths and predictions class-agnostically, so cross-class confusions
//! show up in the confusion matrix. Leftovers are then rescued as groups: one
//! prediction covering several same-class ground truths (under-detection) or
//! several same-class predictions covering one ground truth (over-detection),
//! accepted when the IOU of the union reaches the threshold.
//!
//! Average precision ignores group matching and follows the COCO convention
//! with 101 recall points.

mod ap;
mod confusion;
mod matching;
mod report;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coco::{CocoError, DatasetDoc, ImageRecord, Instance};
use crate::geometry::{intersection_area, union_masks, BoundingBox, GeometryError, PixelMask};

pub use ap::{average_precision, interpolated_ap};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use matching::{
    greedy_match, match_image, resolve_over_detection, resolve_under_detection, MatchKind, MatchOutcome, MatchRecord,
    Unmatched,
};
pub use report::{map_all, write_matches_csv, ClassAccuracy, ClassAp, EvalReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("prediction {prediction} refers to unknown image {image_id}")]
    UnknownImage { prediction: u64, image_id: u64 },
    #[error("{entity} has category_id {category_id}, which is not in the category table")]
    UnknownCategory { entity: String, category_id: u64 },
    #[error("prediction {0} has no score")]
    MissingScore(u64),
    #[error(transparent)]
    Coco(#[from] CocoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cannot write matches: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryMode {
    /// Continuous IOU of `[x, y, w, h]` boxes.
    Bbox,
    /// Pixel IOU of decoded masks.
    #[default]
    Mask,
}

impl std::str::FromStr for GeometryMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bbox" => Ok(Self::Bbox),
            "mask" | "segm" => Ok(Self::Mask),
            other => Err(format!("unknown geometry mode {other:?} (expected bbox or mask)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Predictions below this score are left out of the confusion matrix.
    pub score_threshold: f64,
    pub geometry_mode: GeometryMode,
    pub enable_group_matching: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            score_threshold: 0.5,
            geometry_mode: GeometryMode::Mask,
            enable_group_matching: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_threshold", self.iou_threshold),
            ("score_threshold", self.score_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(EvalError::InvalidConfig(format!("{name} {v} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Region {
    Box([f64; 4]),
    Mask(PixelMask, Option<BoundingBox>),
}

fn box_area(b: &[f64; 4]) -> f64 {
    b[2].max(0.0) * b[3].max(0.0)
}

fn box_intersection(a: &[f64; 4], b: &[f64; 4]) -> Option<[f64; 4]> {
    let x0 = a[0].max(b[0]);
    let y0 = a[1].max(b[1]);
    let x1 = (a[0] + a[2]).min(b[0] + b[2]);
    let y1 = (a[1] + a[3]).min(b[1] + b[3]);
    (x1 > x0 && y1 > y0).then_some([x0, y0, x1 - x0, y1 - y0])
}

fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let Some(i) = box_intersection(a, b) else { return 0.0 };
    let inter = box_area(&i);
    let union = box_area(a) + box_area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Area covered by a set of axis-aligned boxes.
pub(crate) fn union_area(boxes: &[[f64; 4]]) -> f64 {
    let mut xs: Vec<f64> = boxes.iter().flat_map(|b| [b[0], b[0] + b[2]]).collect();
    let mut ys: Vec<f64> = boxes.iter().flat_map(|b| [b[1], b[1] + b[3]]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let covered = boxes
                .iter()
                .any(|b| b[0] <= xw[0] && xw[1] <= b[0] + b[2] && b[1] <= yw[0] && yw[1] <= b[1] + b[3]);
            if covered {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}

impl Region {
    fn of(inst: &Instance, img: &ImageRecord, mode: GeometryMode) -> Result<Self> {
        Ok(match mode {
            GeometryMode::Bbox => Region::Box(inst.bbox),
            GeometryMode::Mask => {
                let m = inst.region_at(img.width, img.height)?;
                let bb = m.bbox();
                Region::Mask(m, bb)
            }
        })
    }

    fn iou(&self, other: &Region) -> f64 {
        match (self, other) {
            (Region::Box(a), Region::Box(b)) => box_iou(a, b),
            (Region::Mask(a, Some(ab)), Region::Mask(b, Some(bb))) if ab.overlaps(bb) => {
                crate::geometry::iou(a, b).unwrap_or(0.0)
            }
            _ => 0.0,
        }
    }

    /// IOU between the union of `members` and `other`.
    fn group_iou(members: &[&Region], other: &Region) -> f64 {
        match other {
            Region::Box(b) => {
                let boxes: Vec<[f64; 4]> = members
                    .iter()
                    .filter_map(|r| match r {
                        Region::Box(m) => Some(*m),
                        Region::Mask(..) => None,
                    })
                    .collect();
                let clipped: Vec<[f64; 4]> = boxes.iter().filter_map(|m| box_intersection(m, b)).collect();
                let inter = union_area(&clipped);
                let union = union_area(&boxes) + box_area(b) - inter;
                if union > 0.0 {
                    inter / union
                } else {
                    0.0
                }
            }
            Region::Mask(b, _) => {
                let masks = members.iter().filter_map(|r| match r {
                    Region::Mask(m, _) => Some(m),
                    Region::Box(_) => None,
                });
                let Ok(u) = union_masks(masks) else { return 0.0 };
                let Ok(inter) = intersection_area(&u, b) else {
                    return 0.0;
                };
                let union = u.area() + b.area() - inter;
                if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Item {
    pub id: u64,
    pub category_id: u64,
    pub score: f64,
    pub region: Region,
}

/// Ground truths and predictions of one image with their pairwise IOUs.
#[derive(Debug, Clone)]
pub(crate) struct ImageContext {
    pub image_id: u64,
    /// Sorted by id.
    pub gts: Vec<Item>,
    /// Sorted by id.
    pub preds: Vec<Item>,
    iou: Vec<f64>,
}

impl ImageContext {
    pub fn new(img: &ImageRecord, gts: &[&Instance], preds: &[&Instance], mode: GeometryMode) -> Result<Self> {
        let item = |inst: &Instance, score: f64| -> Result<Item> {
            Ok(Item {
                id: inst.id,
                category_id: inst.category_id,
                score,
                region: Region::of(inst, img, mode)?,
            })
        };
        let mut g: Vec<Item> = gts.iter().map(|i| item(i, 0.0)).collect::<Result<_>>()?;
        let mut p: Vec<Item> = preds
            .iter()
            .map(|i| item(i, i.score.ok_or(EvalError::MissingScore(i.id))?))
            .collect::<Result<_>>()?;
        g.sort_by_key(|i| i.id);
        p.sort_by_key(|i| i.id);
        let mut iou = vec![0.0; g.len() * p.len()];
        for (gi, gt) in g.iter().enumerate() {
            for (pi, pr) in p.iter().enumerate() {
                iou[gi * p.len() + pi] = gt.region.iou(&pr.region);
            }
        }
        Ok(Self {
            image_id: img.id,
            gts: g,
            preds: p,
            iou,
        })
    }

    pub fn iou(&self, gt: usize, pred: usize) -> f64 {
        self.iou[gt * self.preds.len() + pred]
    }

    /// Indices of predictions scoring at least `threshold`.
    pub fn preds_above(&self, threshold: f64) -> Vec<usize> {
        (0..self.preds.len())
            .filter(|&i| self.preds[i].score >= threshold)
            .collect()
    }
}

/// Builds one context per image, in ascending image id order.
pub(crate) fn prepare(gt: &DatasetDoc, preds: &[Instance], mode: GeometryMode) -> Result<Vec<ImageContext>> {
    let categories: HashSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    let images: HashSet<u64> = gt.images.iter().map(|i| i.id).collect();
    let mut preds_by_image: BTreeMap<u64, Vec<&Instance>> = BTreeMap::new();
    for p in preds {
        if !images.contains(&p.image_id) {
            return Err(EvalError::UnknownImage {
                prediction: p.id,
                image_id: p.image_id,
            });
        }
        if !categories.contains(&p.category_id) {
            return Err(EvalError::UnknownCategory {
                entity: format!("prediction {}", p.id),
                category_id: p.category_id,
            });
        }
        preds_by_image.entry(p.image_id).or_default().push(p);
    }
    if let Some(a) = gt.annotations.iter().find(|a| !categories.contains(&a.category_id)) {
        return Err(EvalError::UnknownCategory {
            entity: format!("annotation {}", a.id),
            category_id: a.category_id,
        });
    }
    let gts_by_image = gt.annotations_by_image();
    let mut imgs: Vec<&ImageRecord> = gt.images.iter().collect();
    imgs.sort_by_key(|i| i.id);
    imgs.par_iter()
        .map(|img| {
            let g = gts_by_image.get(&img.id).map_or(&[][..], |v| v);
            let p = preds_by_image.get(&img.id).map_or(&[][..], |v| v);
            ImageContext::new(img, g, p, mode)
        })
        .collect()
}
