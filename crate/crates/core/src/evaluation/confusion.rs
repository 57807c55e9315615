use serde::Serialize;

use crate::coco::{Category, DatasetDoc, Instance};

use super::matching::{match_context, MatchKind, MatchOutcome};
use super::{prepare, EvalConfig, Result};

/// Counts indexed `[ground truth][prediction]` over the categories in id
/// order followed by a Background row and column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    /// Category ids; Background is the extra last index.
    pub class_ids: Vec<u64>,
    /// Category names followed by `"Background"`.
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its sum; all-zero rows stay zero.
    pub row_normalized: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(categories: &[Category]) -> Self {
        let mut cats: Vec<&Category> = categories.iter().collect();
        cats.sort_by_key(|c| c.id);
        let n = cats.len() + 1;
        let mut labels: Vec<String> = cats.iter().map(|c| c.name.clone()).collect();
        labels.push("Background".into());
        Self {
            class_ids: cats.iter().map(|c| c.id).collect(),
            labels,
            counts: vec![vec![0; n]; n],
            row_normalized: vec![vec![0.0; n]; n],
        }
    }

    pub fn background(&self) -> usize {
        self.class_ids.len()
    }

    /// Index of a category; unknown ids map to Background.
    pub fn index(&self, category_id: u64) -> usize {
        self.class_ids
            .iter()
            .position(|&c| c == category_id)
            .unwrap_or(self.background())
    }

    /// Adds the counts implied by one image's matching.
    pub fn add(&mut self, outcome: &MatchOutcome) {
        let bg = self.background();
        for r in &outcome.records {
            let (g, p) = (self.index(r.gt_class), self.index(r.pred_class));
            let n = match r.kind {
                MatchKind::OneToOne | MatchKind::OverDetection => 1,
                MatchKind::UnderDetection => r.gt_ids.len() as u64,
            };
            self.counts[g][p] += n;
        }
        for u in &outcome.unmatched_gts {
            let g = self.index(u.category_id);
            self.counts[g][bg] += 1;
        }
        for u in &outcome.unmatched_preds {
            let p = self.index(u.category_id);
            self.counts[bg][p] += 1;
        }
    }

    /// Recomputes `row_normalized` from `counts`.
    pub fn normalize(&mut self) {
        let bg = self.background();
        self.counts[bg][bg] = 0;
        self.row_normalized = self
            .counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect();
    }

    /// Diagonal of the row-normalized matrix for each category row, `None`
    /// for rows without ground truth.
    pub fn accuracy(&self) -> Vec<Option<f64>> {
        (0..self.class_ids.len())
            .map(|i| {
                let total: u64 = self.counts[i].iter().sum();
                (total > 0).then(|| self.row_normalized[i][i])
            })
            .collect()
    }

    /// Aligned text rendering with percentages rounded to integers.
    pub fn to_text(&self) -> String {
        let corner = "GT \\ Pred";
        let width = self
            .labels
            .iter()
            .map(String::len)
            .chain([corner.len(), 5])
            .max()
            .unwrap_or(5);
        let mut out = format!("{corner:<width$}");
        for l in &self.labels {
            out.push_str(&format!("  {l:>width$}"));
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.row_normalized) {
            out.push_str(&format!("{label:<width$}"));
            for v in row {
                let pct = format!("{}%", (v * 100.0).round() as i64);
                out.push_str(&format!("  {pct:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Confusion matrix over a corpus, using predictions scoring at least
/// `cfg.score_threshold`.
pub fn confusion_matrix(gt: &DatasetDoc, preds: &[Instance], cfg: &EvalConfig) -> Result<ConfusionMatrix> {
    cfg.validate()?;
    let contexts = prepare(gt, preds, cfg.geometry_mode)?;
    let mut cm = ConfusionMatrix::new(&gt.categories);
    for ctx in &contexts {
        let kept = ctx.preds_above(cfg.score_threshold);
        cm.add(&match_context(ctx, &kept, cfg.iou_threshold, cfg.enable_group_matching));
    }
    cm.normalize();
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coco::{HeightClassScheme, ImageRecord};
    use crate::geometry::{rasterize, Polygon};

    fn rect(id: u64, class: u64, r: (f64, f64, f64, f64)) -> Instance {
        Instance::from_mask(
            id,
            1,
            class,
            rasterize(&Polygon::rect(r.0, r.1, r.2, r.3), 64, 64).unwrap(),
        )
    }

    fn doc(gts: Vec<Instance>) -> DatasetDoc {
        DatasetDoc {
            images: vec![ImageRecord::new(1, "a.png", 64, 64)],
            annotations: gts,
            categories: HeightClassScheme::default().categories(),
            ..Default::default()
        }
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let gts = vec![
            rect(1, 1, (0.0, 0.0, 8.0, 8.0)),
            rect(2, 2, (20.0, 0.0, 28.0, 8.0)),
            rect(3, 3, (40.0, 0.0, 48.0, 8.0)),
        ];
        let preds: Vec<Instance> = gts.iter().map(|g| g.clone().with_score(1.0)).collect();
        let cm = confusion_matrix(&doc(gts), &preds, &EvalConfig::default()).unwrap();
        for i in 0..3 {
            assert_eq!(cm.row_normalized[i][i], 1.0);
        }
        assert_eq!(cm.counts[3], vec![0, 0, 0, 0]);
        assert_eq!(cm.accuracy(), vec![Some(1.0), Some(1.0), Some(1.0)]);
    }

    #[test]
    fn cross_class_confusion() {
        let gts = vec![rect(1, 1, (0.0, 0.0, 10.0, 10.0))];
        let preds = vec![rect(9, 2, (0.0, 0.0, 10.0, 8.0)).with_score(0.9)];
        let cm = confusion_matrix(&doc(gts), &preds, &EvalConfig::default()).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.counts.iter().flatten().sum::<u64>(), 1);
    }

    #[test]
    fn hand_computed_fixture() {
        let gts = vec![
            // one-to-one, class 1
            rect(1, 1, (0.0, 0.0, 10.0, 10.0)),
            // under-detected pair, class 2
            rect(2, 2, (20.0, 0.0, 30.0, 10.0)),
            rect(3, 2, (32.0, 0.0, 42.0, 10.0)),
            // missed, class 3
            rect(4, 3, (0.0, 40.0, 10.0, 50.0)),
        ];
        let preds = vec![
            rect(11, 1, (0.0, 0.0, 10.0, 10.0)).with_score(0.9),
            rect(12, 2, (20.0, 0.0, 42.0, 10.0)).with_score(0.8),
            // spurious, class 1
            rect(13, 1, (40.0, 40.0, 50.0, 50.0)).with_score(0.7),
            // below the score threshold, ignored
            rect(14, 3, (0.0, 40.0, 10.0, 50.0)).with_score(0.3),
        ];
        let d = doc(gts);
        let cm = confusion_matrix(&d, &preds, &EvalConfig::default()).unwrap();
        assert_eq!(
            cm.counts,
            vec![vec![1, 0, 0, 0], vec![0, 2, 0, 0], vec![0, 0, 0, 1], vec![1, 0, 0, 0]]
        );
        let off = EvalConfig {
            enable_group_matching: false,
            ..Default::default()
        };
        let cm = confusion_matrix(&d, &preds, &off).unwrap();
        assert_eq!(
            cm.counts,
            vec![vec![1, 0, 0, 0], vec![0, 0, 0, 2], vec![0, 0, 0, 1], vec![1, 1, 0, 0]]
        );
        assert_eq!(cm.row_normalized[3], vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn text_layout() {
        let gts = vec![rect(1, 1, (0.0, 0.0, 10.0, 10.0))];
        let cm = confusion_matrix(&doc(gts), &[], &EvalConfig::default()).unwrap();
        let text = cm.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("GT \\ Pred"));
        assert!(lines[1].starts_with("0m-15m") && lines[1].ends_with("100%"));
        assert!(lines[4].starts_with("Background"));
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
    }
}
