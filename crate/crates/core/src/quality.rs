//! Screening of annotated images against a reference model's predictions.
//!
//! An image is dropped when too many of its annotations have no matching
//! prediction, or too many predictions have no matching annotation.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coco::{CocoError, DatasetDoc, ImageRecord, Instance};
use crate::geometry::{iou, GeometryError, PixelMask};

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("prediction {prediction} refers to unknown image {image_id}")]
    UnknownImage { prediction: u64, image_id: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Coco(#[from] CocoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cannot write report: {0}")]
    Report(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, QualityError>;

#[derive(Debug, Clone, PartialEq)]
pub struct QualityConfig {
    /// Minimum IOU for an annotation and a prediction to count as matched.
    pub iou_threshold: f64,
    /// An image is discarded when either missing ratio exceeds this value.
    pub discard_ratio: f64,
    /// Predictions scoring below this value are ignored.
    pub score_threshold: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            discard_ratio: 0.5,
            score_threshold: 0.5,
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(QualityError::InvalidConfig(format!(
                "iou_threshold {} must be in (0, 1]",
                self.iou_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.discard_ratio) {
            return Err(QualityError::InvalidConfig(format!(
                "discard_ratio {} must be in [0, 1]",
                self.discard_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(QualityError::InvalidConfig(format!(
                "score_threshold {} must be in [0, 1]",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageQualityStats {
    pub image_id: u64,
    pub n_annotations: usize,
    pub n_predictions: usize,
    pub n_unmatched_annotations: usize,
    pub n_unmatched_predictions: usize,
    pub missing_annotation_ratio: f64,
    pub missing_prediction_ratio: f64,
    pub discard: bool,
}

fn ratio(part: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        part as f64 / total as f64
    }
}

/// Matches annotations and predictions of one image by IOU.
///
/// Matching is class-agnostic and many-to-one: each side only needs some
/// partner at or above the threshold.
pub fn assess_image(
    image: &ImageRecord,
    gt: &[Instance],
    preds: &[Instance],
    iou_threshold: f64,
    discard_ratio: f64,
) -> Result<ImageQualityStats> {
    let regions = |list: &[Instance]| -> Result<Vec<PixelMask>> {
        Ok(list
            .iter()
            .map(|i| i.region_at(image.width, image.height))
            .collect::<std::result::Result<_, _>>()?)
    };
    let gt_masks = regions(gt)?;
    let pred_masks = regions(preds)?;
    let gt_boxes: Vec<_> = gt_masks.iter().map(PixelMask::bbox).collect();
    let pred_boxes: Vec<_> = pred_masks.iter().map(PixelMask::bbox).collect();

    let mut gt_hit = vec![false; gt.len()];
    let mut pred_hit = vec![false; preds.len()];
    for (i, gm) in gt_masks.iter().enumerate() {
        let Some(gb) = gt_boxes[i] else { continue };
        for (j, pm) in pred_masks.iter().enumerate() {
            if gt_hit[i] && pred_hit[j] {
                continue;
            }
            let Some(pb) = pred_boxes[j] else { continue };
            if !gb.overlaps(&pb) {
                continue;
            }
            if iou(gm, pm).unwrap_or(0.0) >= iou_threshold {
                gt_hit[i] = true;
                pred_hit[j] = true;
            }
        }
    }
    let n_unmatched_annotations = gt_hit.iter().filter(|&&h| !h).count();
    let n_unmatched_predictions = pred_hit.iter().filter(|&&h| !h).count();
    let missing_annotation_ratio = ratio(n_unmatched_annotations, gt.len());
    let missing_prediction_ratio = ratio(n_unmatched_predictions, preds.len());
    Ok(ImageQualityStats {
        image_id: image.id,
        n_annotations: gt.len(),
        n_predictions: preds.len(),
        n_unmatched_annotations,
        n_unmatched_predictions,
        missing_annotation_ratio,
        missing_prediction_ratio,
        discard: missing_annotation_ratio > discard_ratio || missing_prediction_ratio > discard_ratio,
    })
}

/// Screens every image of `doc` and keeps the ones that pass.
///
/// The report has one row per image in ascending image id order.
pub fn filter_dataset(
    doc: &DatasetDoc,
    preds: &[Instance],
    cfg: &QualityConfig,
) -> Result<(DatasetDoc, Vec<ImageQualityStats>)> {
    cfg.validate()?;
    let known: HashSet<u64> = doc.images.iter().map(|i| i.id).collect();
    let mut preds_by_image: BTreeMap<u64, Vec<Instance>> = BTreeMap::new();
    for p in preds {
        if !known.contains(&p.image_id) {
            return Err(QualityError::UnknownImage {
                prediction: p.id,
                image_id: p.image_id,
            });
        }
        if p.score.unwrap_or(1.0) >= cfg.score_threshold {
            preds_by_image.entry(p.image_id).or_default().push(p.clone());
        }
    }
    let gt_by_image = doc.annotations_by_image();
    let mut images: Vec<&ImageRecord> = doc.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let report: Vec<ImageQualityStats> = images
        .par_iter()
        .map(|img| {
            let gt: Vec<Instance> = gt_by_image
                .get(&img.id)
                .map(|v| v.iter().map(|&a| a.clone()).collect())
                .unwrap_or_default();
            let p = preds_by_image.get(&img.id).map_or(&[][..], |v| v);
            assess_image(img, &gt, p, cfg.iou_threshold, cfg.discard_ratio)
        })
        .collect::<Result<_>>()?;

    let dropped: HashSet<u64> = report.iter().filter(|s| s.discard).map(|s| s.image_id).collect();
    let mut kept = doc.clone();
    kept.images.retain(|i| !dropped.contains(&i.id));
    kept.annotations.retain(|a| !dropped.contains(&a.image_id));
    Ok((kept, report))
}

/// Writes the screening report as CSV with a header row.
pub fn write_report<W: Write>(report: &[ImageQualityStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in report {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
