use crate::coco::{DatasetDoc, Instance};

use super::{prepare, EvalConfig, ImageContext, Result};

/// COCO 101-point interpolated AP of a ranked list of TP/FP flags.
///
/// Precision at each recall level `r / 100` is the best precision reached at
/// any recall at or above that level.
pub fn interpolated_ap(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 || tp.is_empty() {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (i, &t) in tp.iter().enumerate() {
        hits += t as usize;
        recall.push(hits as f64 / n_gt as f64);
        precision.push(hits as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut total = 0.0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        let idx = recall.partition_point(|&x| x < level);
        if idx < precision.len() {
            total += precision[idx];
        }
    }
    total / 101.0
}

/// TP/FP flags of every prediction of `category_id`, ranked by descending
/// score then ascending id, and the class's ground-truth count.
pub(crate) fn ranked_hits(contexts: &[ImageContext], category_id: u64, threshold: f64) -> (Vec<bool>, usize) {
    let n_gt = contexts
        .iter()
        .map(|c| c.gts.iter().filter(|g| g.category_id == category_id).count())
        .sum();
    let mut ranked: Vec<(usize, usize)> = contexts
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            c.preds
                .iter()
                .enumerate()
                .filter(|(_, p)| p.category_id == category_id)
                .map(move |(pi, _)| (ci, pi))
        })
        .collect();
    ranked.sort_by(|&(ca, pa), &(cb, pb)| {
        let (a, b) = (&contexts[ca].preds[pa], &contexts[cb].preds[pb]);
        b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)).then(ca.cmp(&cb))
    });
    let mut claimed: Vec<Vec<bool>> = contexts.iter().map(|c| vec![false; c.gts.len()]).collect();
    let mut hits = Vec::with_capacity(ranked.len());
    for (ci, pi) in ranked {
        let ctx = &contexts[ci];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in ctx.gts.iter().enumerate() {
            if g.category_id != category_id || claimed[ci][gi] {
                continue;
            }
            let v = ctx.iou(gi, pi);
            if v >= threshold && v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            claimed[ci][gi] = true;
        }
        hits.push(best.is_some());
    }
    (hits, n_gt)
}

/// AP of one class over the corpus, or `None` when it has no ground truth.
///
/// All predictions count regardless of score; group matching is not used.
pub fn average_precision(
    gt: &DatasetDoc,
    preds: &[Instance],
    category_id: u64,
    cfg: &EvalConfig,
) -> Result<Option<f64>> {
    cfg.validate()?;
    let contexts = prepare(gt, preds, cfg.geometry_mode)?;
    let (hits, n_gt) = ranked_hits(&contexts, category_id, cfg.iou_threshold);
    Ok((n_gt > 0).then(|| interpolated_ap(&hits, n_gt)))
}
