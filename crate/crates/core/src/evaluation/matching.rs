use serde::Serialize;

use crate::coco::{ImageRecord, Instance};

use super::{EvalConfig, ImageContext, Region, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    OneToOne,
    /// One prediction covering several ground truths.
    UnderDetection,
    /// Several predictions covering one ground truth.
    OverDetection,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::OneToOne => "one_to_one",
            MatchKind::UnderDetection => "under_detection",
            MatchKind::OverDetection => "over_detection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRecord {
    pub kind: MatchKind,
    pub image_id: u64,
    /// Ascending.
    pub gt_ids: Vec<u64>,
    /// Ascending.
    pub pred_ids: Vec<u64>,
    pub iou: f64,
    pub gt_class: u64,
    pub pred_class: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Unmatched {
    pub id: u64,
    pub category_id: u64,
}

/// Matches of one image plus whatever stayed unmatched, each in id order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchOutcome {
    pub records: Vec<MatchRecord>,
    pub unmatched_gts: Vec<Unmatched>,
    pub unmatched_preds: Vec<Unmatched>,
}

/// Greedy one-to-one matching over the given index subsets.
///
/// Returns accepted `(gt, pred)` pairs in acceptance order, then the
/// unmatched gt and pred indices in ascending order.
pub(crate) fn greedy(
    ctx: &ImageContext,
    gts: &[usize],
    preds: &[usize],
    threshold: f64,
) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let mut candidates = Vec::new();
    for &g in gts {
        for &p in preds {
            let v = ctx.iou(g, p);
            if v >= threshold && v > 0.0 {
                candidates.push((g, p, v));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(ctx.preds[b.1].score.total_cmp(&ctx.preds[a.1].score))
            .then(ctx.gts[a.0].id.cmp(&ctx.gts[b.0].id))
            .then(ctx.preds[a.1].id.cmp(&ctx.preds[b.1].id))
    });
    let mut gt_used = vec![false; ctx.gts.len()];
    let mut pred_used = vec![false; ctx.preds.len()];
    let mut pairs = Vec::new();
    for (g, p, _) in candidates {
        if !gt_used[g] && !pred_used[p] {
            gt_used[g] = true;
            pred_used[p] = true;
            pairs.push((g, p));
        }
    }
    let mut ug: Vec<usize> = gts.iter().copied().filter(|&g| !gt_used[g]).collect();
    let mut up: Vec<usize> = preds.iter().copied().filter(|&p| !pred_used[p]).collect();
    ug.sort_unstable();
    up.sort_unstable();
    (pairs, ug, up)
}

/// Same-class unmatched gts touching `pred`, accepted when there are at
/// least two and their union reaches the threshold.
pub(crate) fn under(ctx: &ImageContext, pred: usize, gts: &[usize], threshold: f64) -> Option<(Vec<usize>, f64)> {
    let class = ctx.preds[pred].category_id;
    let group: Vec<usize> = gts
        .iter()
        .copied()
        .filter(|&g| ctx.gts[g].category_id == class && ctx.iou(g, pred) > 0.0)
        .collect();
    if group.len() < 2 {
        return None;
    }
    let members: Vec<&Region> = group.iter().map(|&g| &ctx.gts[g].region).collect();
    let v = Region::group_iou(&members, &ctx.preds[pred].region);
    (v >= threshold).then_some((group, v))
}

/// Mirror image of [`under`].
pub(crate) fn over(ctx: &ImageContext, gt: usize, preds: &[usize], threshold: f64) -> Option<(Vec<usize>, f64)> {
    let class = ctx.gts[gt].category_id;
    let group: Vec<usize> = preds
        .iter()
        .copied()
        .filter(|&p| ctx.preds[p].category_id == class && ctx.iou(gt, p) > 0.0)
        .collect();
    if group.len() < 2 {
        return None;
    }
    let members: Vec<&Region> = group.iter().map(|&p| &ctx.preds[p].region).collect();
    let v = Region::group_iou(&members, &ctx.gts[gt].region);
    (v >= threshold).then_some((group, v))
}

fn record(ctx: &ImageContext, kind: MatchKind, gts: &[usize], preds: &[usize], iou: f64) -> MatchRecord {
    let mut gt_ids: Vec<u64> = gts.iter().map(|&g| ctx.gts[g].id).collect();
    let mut pred_ids: Vec<u64> = preds.iter().map(|&p| ctx.preds[p].id).collect();
    gt_ids.sort_unstable();
    pred_ids.sort_unstable();
    MatchRecord {
        kind,
        image_id: ctx.image_id,
        gt_ids,
        pred_ids,
        iou,
        gt_class: ctx.gts[gts[0]].category_id,
        pred_class: ctx.preds[preds[0]].category_id,
    }
}

/// Full matching of one image restricted to the predictions in `preds`.
///
/// Under-detections are resolved first, visiting unmatched predictions by
/// descending score then ascending id. Over-detections follow, visiting
/// unmatched ground truths by ascending id.
pub(crate) fn match_context(ctx: &ImageContext, preds: &[usize], threshold: f64, groups: bool) -> MatchOutcome {
    let all_gts: Vec<usize> = (0..ctx.gts.len()).collect();
    let (pairs, mut ug, mut up) = greedy(ctx, &all_gts, preds, threshold);
    let mut records: Vec<MatchRecord> = pairs
        .iter()
        .map(|&(g, p)| record(ctx, MatchKind::OneToOne, &[g], &[p], ctx.iou(g, p)))
        .collect();

    if groups {
        let mut order = up.clone();
        order.sort_by(|&a, &b| {
            ctx.preds[b]
                .score
                .total_cmp(&ctx.preds[a].score)
                .then(ctx.preds[a].id.cmp(&ctx.preds[b].id))
        });
        for p in order {
            if let Some((group, v)) = under(ctx, p, &ug, threshold) {
                ug.retain(|g| !group.contains(g));
                up.retain(|&q| q != p);
                records.push(record(ctx, MatchKind::UnderDetection, &group, &[p], v));
            }
        }
        for g in ug.clone() {
            if let Some((group, v)) = over(ctx, g, &up, threshold) {
                up.retain(|q| !group.contains(q));
                ug.retain(|&h| h != g);
                records.push(record(ctx, MatchKind::OverDetection, &[g], &group, v));
            }
        }
    }

    records.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then(a.gt_ids.cmp(&b.gt_ids))
            .then(a.pred_ids.cmp(&b.pred_ids))
            .then(a.iou.total_cmp(&b.iou))
    });
    MatchOutcome {
        records,
        unmatched_gts: ug
            .iter()
            .map(|&g| Unmatched {
                id: ctx.gts[g].id,
                category_id: ctx.gts[g].category_id,
            })
            .collect(),
        unmatched_preds: up
            .iter()
            .map(|&p| Unmatched {
                id: ctx.preds[p].id,
                category_id: ctx.preds[p].category_id,
            })
            .collect(),
    }
}

/// Greedy class-agnostic one-to-one matching of one image.
pub fn greedy_match(
    image: &ImageRecord,
    gts: &[Instance],
    preds: &[Instance],
    cfg: &EvalConfig,
) -> Result<MatchOutcome> {
    cfg.validate()?;
    let ctx = ImageContext::new(
        image,
        &gts.iter().collect::<Vec<_>>(),
        &preds.iter().collect::<Vec<_>>(),
        cfg.geometry_mode,
    )?;
    let preds: Vec<usize> = (0..ctx.preds.len()).collect();
    Ok(match_context(&ctx, &preds, cfg.iou_threshold, false))
}

/// Greedy matching followed by group resolution when enabled in `cfg`.
pub fn match_image(
    image: &ImageRecord,
    gts: &[Instance],
    preds: &[Instance],
    cfg: &EvalConfig,
) -> Result<MatchOutcome> {
    cfg.validate()?;
    let ctx = ImageContext::new(
        image,
        &gts.iter().collect::<Vec<_>>(),
        &preds.iter().collect::<Vec<_>>(),
        cfg.geometry_mode,
    )?;
    let preds: Vec<usize> = (0..ctx.preds.len()).collect();
    Ok(match_context(
        &ctx,
        &preds,
        cfg.iou_threshold,
        cfg.enable_group_matching,
    ))
}

/// Tries to credit `pred` as one detection of several ground truths in `gts`.
pub fn resolve_under_detection(
    image: &ImageRecord,
    pred: &Instance,
    gts: &[Instance],
    cfg: &EvalConfig,
) -> Result<Option<MatchRecord>> {
    cfg.validate()?;
    let ctx = ImageContext::new(image, &gts.iter().collect::<Vec<_>>(), &[pred], cfg.geometry_mode)?;
    let all: Vec<usize> = (0..ctx.gts.len()).collect();
    Ok(under(&ctx, 0, &all, cfg.iou_threshold).map(|(g, v)| record(&ctx, MatchKind::UnderDetection, &g, &[0], v)))
}

/// Tries to credit several predictions in `preds` as one detection of `gt`.
pub fn resolve_over_detection(
    image: &ImageRecord,
    gt: &Instance,
    preds: &[Instance],
    cfg: &EvalConfig,
) -> Result<Option<MatchRecord>> {
    cfg.validate()?;
    let ctx = ImageContext::new(image, &[gt], &preds.iter().collect::<Vec<_>>(), cfg.geometry_mode)?;
    let all: Vec<usize> = (0..ctx.preds.len()).collect();
    Ok(over(&ctx, 0, &all, cfg.iou_threshold).map(|(p, v)| record(&ctx, MatchKind::OverDetection, &[0], &p, v)))
}
