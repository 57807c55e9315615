use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::coco::{DatasetDoc, Instance};

use super::ap::{interpolated_ap, ranked_hits};
use super::confusion::ConfusionMatrix;
use super::matching::{match_context, MatchRecord};
use super::{prepare, EvalConfig, GeometryMode, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub category_id: u64,
    pub name: String,
    pub n_gt: usize,
    pub n_pred: usize,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAccuracy {
    pub category_id: u64,
    pub name: String,
    pub accuracy: Option<f64>,
    pub accuracy_without_group_matching: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Free-form run metadata supplied by the caller.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, Value>,
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub geometry_mode: GeometryMode,
    pub group_matching: bool,
    pub per_class_ap: Vec<ClassAp>,
    /// Mean AP over classes with ground truth.
    pub map: Option<f64>,
    pub confusion_matrix: ConfusionMatrix,
    pub accuracy: Vec<ClassAccuracy>,
    pub matches: Vec<MatchRecord>,
}

/// Scores a corpus of predictions: per-class AP and mAP over all
/// predictions, and the confusion matrix, accuracies and match records over
/// the predictions passing the score threshold.
pub fn map_all(gt: &DatasetDoc, preds: &[Instance], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let contexts = prepare(gt, preds, cfg.geometry_mode)?;

    let mut cm = ConfusionMatrix::new(&gt.categories);
    let mut cm_plain = ConfusionMatrix::new(&gt.categories);
    let mut matches = Vec::new();
    for ctx in &contexts {
        let kept = ctx.preds_above(cfg.score_threshold);
        let with_groups = match_context(ctx, &kept, cfg.iou_threshold, cfg.enable_group_matching);
        let plain = match_context(ctx, &kept, cfg.iou_threshold, false);
        cm.add(&with_groups);
        cm_plain.add(&plain);
        matches.extend(with_groups.records);
    }
    cm.normalize();
    cm_plain.normalize();

    let per_class_ap: Vec<ClassAp> = cm
        .class_ids
        .iter()
        .zip(&cm.labels)
        .map(|(&id, name)| {
            let (hits, n_gt) = ranked_hits(&contexts, id, cfg.iou_threshold);
            ClassAp {
                category_id: id,
                name: name.clone(),
                n_gt,
                n_pred: hits.len(),
                ap: (n_gt > 0).then(|| interpolated_ap(&hits, n_gt)),
            }
        })
        .collect();
    let defined: Vec<f64> = per_class_ap.iter().filter_map(|c| c.ap).collect();
    let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    let accuracy = cm
        .class_ids
        .iter()
        .zip(&cm.labels)
        .zip(cm.accuracy().into_iter().zip(cm_plain.accuracy()))
        .map(|((&id, name), (a, b))| ClassAccuracy {
            category_id: id,
            name: name.clone(),
            accuracy: a,
            accuracy_without_group_matching: b,
        })
        .collect();

    Ok(EvalReport {
        provenance: BTreeMap::new(),
        iou_threshold: cfg.iou_threshold,
        score_threshold: cfg.score_threshold,
        geometry_mode: cfg.geometry_mode,
        group_matching: cfg.enable_group_matching,
        per_class_ap,
        map,
        confusion_matrix: cm,
        accuracy,
        matches,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", v * 100.0))
}

impl EvalReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report is serializable");
        out.push(b'\n');
        out
    }

    /// Human-readable summary: AP table, confusion matrix and accuracies.
    pub fn to_text(&self) -> String {
        let mode = match self.geometry_mode {
            GeometryMode::Bbox => "bbox",
            GeometryMode::Mask => "mask",
        };
        let mut out = String::new();
        let _ = writeln!(out, "{mode} AP @ IOU {}", self.iou_threshold);
        let width = self.per_class_ap.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
        for c in &self.per_class_ap {
            let _ = writeln!(
                out,
                "  {:<width$}  {:>6}  (gt {}, pred {})",
                c.name,
                pct(c.ap),
                c.n_gt,
                c.n_pred
            );
        }
        let _ = writeln!(out, "  {:<width$}  {:>6}", "mAP", pct(self.map));
        let _ = writeln!(
            out,
            "\nConfusion matrix (row-normalized, score >= {}, group matching {})",
            self.score_threshold,
            if self.group_matching { "on" } else { "off" }
        );
        out.push_str(&self.confusion_matrix.to_text());
        let _ = writeln!(out, "\nAccuracy (with / without group matching)");
        for a in &self.accuracy {
            let _ = writeln!(
                out,
                "  {:<width$}  {:>6} / {:>6}",
                a.name,
                pct(a.accuracy),
                pct(a.accuracy_without_group_matching)
            );
        }
        out
    }
}

/// Writes match records as CSV: kind, image_id, gt_ids, pred_ids, iou.
/// Id lists are `;`-separated.
pub fn write_matches_csv<W: Write>(records: &[MatchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "image_id", "gt_ids", "pred_ids", "iou"])?;
    let join = |ids: &[u64]| ids.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
    for r in records {
        w.write_record([
            r.kind.as_str().to_string(),
            r.image_id.to_string(),
            join(&r.gt_ids),
            join(&r.pred_ids),
            r.iou.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
