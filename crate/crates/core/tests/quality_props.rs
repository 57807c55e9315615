//! Screening properties on generated corpora.

use geoseg_core::coco::{building_categories, DatasetDoc, ImageRecord, Instance};
use geoseg_core::geometry::{rasterize, Polygon};
use geoseg_core::quality::{filter_dataset, QualityConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rect(id: u64, image_id: u64, rng: &mut ChaCha8Rng) -> Instance {
    let (x, y) = (rng.gen_range(0..28) as f64, rng.gen_range(0..28) as f64);
    let poly = Polygon::rect(x, y, x + rng.gen_range(2..6) as f64, y + rng.gen_range(2..6) as f64);
    Instance::from_mask(id, image_id, 1, rasterize(&poly, 32, 32).unwrap())
}

fn corpus(seed: u64) -> (DatasetDoc, Vec<Instance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = DatasetDoc {
        categories: building_categories(),
        ..Default::default()
    };
    let mut preds = Vec::new();
    for img in 1..=rng.gen_range(1..6u64) {
        doc.images.push(ImageRecord::new(img, format!("{img}.png"), 32, 32));
        for _ in 0..rng.gen_range(0..5) {
            let a = rect(doc.annotations.len() as u64 + 1, img, &mut rng);
            if rng.gen_bool(0.7) {
                let mut p = a.clone().with_score(rng.gen_range(0.0..1.0));
                p.id += 1000;
                preds.push(p);
            }
            doc.annotations.push(a);
        }
        for _ in 0..rng.gen_range(0..3) {
            let id = 2000 + preds.len() as u64;
            preds.push(rect(id, img, &mut rng).with_score(rng.gen_range(0.0..1.0)));
        }
    }
    (doc, preds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stricter_iou_never_lowers_missing_ratios(seed in any::<u64>(), t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let (doc, preds) = corpus(seed);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let at = |t: f64| filter_dataset(&doc, &preds, &QualityConfig { iou_threshold: t, ..Default::default() }).unwrap().1;
        for (a, b) in at(lo).iter().zip(at(hi)) {
            prop_assert!(b.missing_annotation_ratio >= a.missing_annotation_ratio);
            prop_assert!(b.missing_prediction_ratio >= a.missing_prediction_ratio);
        }
    }

    #[test]
    fn filtering_is_order_free_and_lossless(seed in any::<u64>()) {
        let (doc, preds) = corpus(seed);
        let cfg = QualityConfig::default();
        let (kept, report) = filter_dataset(&doc, &preds, &cfg).unwrap();
        prop_assert_eq!(report.len(), doc.images.len());
        for s in &report {
            let discard = s.missing_annotation_ratio > 0.5 || s.missing_prediction_ratio > 0.5;
            prop_assert_eq!(s.discard, discard);
            prop_assert_eq!(kept.images.iter().any(|i| i.id == s.image_id), !discard);
        }
        for a in &doc.annotations {
            let kept_image = kept.images.iter().any(|i| i.id == a.image_id);
            prop_assert_eq!(kept.annotations.contains(a), kept_image);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let mut shuffled = preds.clone();
        shuffled.shuffle(&mut rng);
        let (_, report2) = filter_dataset(&doc, &shuffled, &cfg).unwrap();
        prop_assert_eq!(report, report2);
    }
}
