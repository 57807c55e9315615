use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{DatasetDoc, Finding, HeightClassScheme, ImageRecord, Instance};

fn image_entity(id: u64) -> String {
    format!("image {id}")
}

fn annotation_entity(id: u64) -> String {
    format!("annotation {id}")
}

/// Checks every structural invariant of a ground-truth corpus.
///
/// With a `scheme` whose category table matches the document, annotations
/// whose `category_id` disagrees with their `height_m` produce warnings.
pub fn validate_dataset(doc: &DatasetDoc, scheme: Option<&HeightClassScheme>) -> Vec<Finding> {
    let mut findings = Vec::new();

    let mut image_ids = HashSet::new();
    for img in &doc.images {
        if img.id == 0 {
            findings.push(Finding::error(image_entity(img.id), "image id must be positive"));
        }
        if !image_ids.insert(img.id) {
            findings.push(Finding::error(
                image_entity(img.id),
                format!("duplicate image id {}", img.id),
            ));
        }
        if img.width == 0 || img.height == 0 {
            findings.push(Finding::error(
                image_entity(img.id),
                format!("invalid size {}x{}", img.width, img.height),
            ));
        }
    }

    let mut category_ids = HashSet::new();
    for cat in &doc.categories {
        if !category_ids.insert(cat.id) {
            findings.push(Finding::error(
                format!("category {}", cat.id),
                format!("duplicate category id {}", cat.id),
            ));
        }
    }

    let mut annotation_ids = HashSet::new();
    for a in &doc.annotations {
        if a.id == 0 {
            continue;
        }
        if !annotation_ids.insert(a.id) {
            findings.push(Finding::error(
                annotation_entity(a.id),
                format!("duplicate annotation id {}", a.id),
            ));
        }
    }

    let images: HashMap<u64, &ImageRecord> = doc.images.iter().map(|i| (i.id, i)).collect();
    let check_classes = scheme.filter(|s| s.matches_categories(&doc.categories));
    let per_annotation: Vec<Vec<Finding>> = doc
        .annotations
        .par_iter()
        .map(|a| {
            let mut out = Vec::new();
            let entity = annotation_entity(a.id);
            if a.score.is_some() {
                out.push(Finding::error(&entity, "ground-truth annotation carries a score"));
            }
            if a.geometry.is_none() {
                out.push(Finding::error(&entity, "annotation has no segmentation"));
            }
            check_references(a, &entity, &images, &category_ids, &mut out);
            check_height(a, check_classes, &mut out);
            if let Some(img) = images.get(&a.image_id) {
                check_extent(a, img, &mut out);
            }
            out
        })
        .collect();
    findings.extend(per_annotation.into_iter().flatten());
    findings
}

/// Checks a list of scored predictions against the corpus they refer to.
pub(crate) fn validate_predictions(preds: &[Instance], gt: &DatasetDoc) -> Vec<Finding> {
    let images: HashMap<u64, &ImageRecord> = gt.images.iter().map(|i| (i.id, i)).collect();
    let category_ids: HashSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    let mut findings = Vec::new();
    let mut ids = HashSet::new();
    for p in preds {
        let entity = format!("prediction {}", p.id);
        if !ids.insert(p.id) {
            findings.push(Finding::error(&entity, format!("duplicate prediction id {}", p.id)));
        }
        match p.score {
            None => findings.push(Finding::error(&entity, "prediction has no score")),
            Some(s) if !(0.0..=1.0).contains(&s) => {
                findings.push(Finding::error(&entity, format!("score {s} outside [0, 1]")))
            }
            Some(_) => {}
        }
        if p.geometry.is_none() && p.bbox.iter().any(|v| !v.is_finite()) {
            findings.push(Finding::error(&entity, "prediction has neither segmentation nor bbox"));
        }
        check_references(p, &entity, &images, &category_ids, &mut findings);
        if let Some(img) = images.get(&p.image_id) {
            if p.geometry.is_some() {
                if let Err(e) = p.mask_at(img.width, img.height) {
                    findings.push(Finding::error(&entity, e.to_string()));
                }
            }
        }
    }
    findings
}

fn check_references(
    a: &Instance,
    entity: &str,
    images: &HashMap<u64, &ImageRecord>,
    category_ids: &HashSet<u64>,
    out: &mut Vec<Finding>,
) {
    if !images.contains_key(&a.image_id) {
        out.push(Finding::error(
            entity,
            format!("image_id {} does not exist", a.image_id),
        ));
    }
    if !category_ids.contains(&a.category_id) {
        out.push(Finding::error(
            entity,
            format!("category_id {} does not exist", a.category_id),
        ));
    }
}

fn check_height(a: &Instance, scheme: Option<&HeightClassScheme>, out: &mut Vec<Finding>) {
    let Some(h) = a.height_m else { return };
    let entity = annotation_entity(a.id);
    if !h.is_finite() || h < 0.0 {
        out.push(Finding::error(&entity, format!("height_m {h} must be non-negative")));
        return;
    }
    if let Some(scheme) = scheme {
        if let Ok(expected) = scheme.class_of(h) {
            if expected != a.category_id {
                out.push(Finding::warning(
                    &entity,
                    format!(
                        "height_m {h} falls in class {expected} but category_id is {}",
                        a.category_id
                    ),
                ));
            }
        }
    }
}

fn check_extent(a: &Instance, img: &ImageRecord, out: &mut Vec<Finding>) {
    if a.geometry.is_none() {
        return;
    }
    let entity = annotation_entity(a.id);
    let mask = match a.mask_at(img.width, img.height) {
        Ok(m) => m,
        Err(e) => {
            out.push(Finding::error(&entity, e.to_string()));
            return;
        }
    };
    let Some(bbox) = mask.bbox() else {
        out.push(Finding::error(&entity, "geometry covers no pixel of the image"));
        return;
    };
    let expected = bbox.as_xywh();
    // written so that NaN counts as a mismatch
    let near = |d: f64, tol: f64| d.abs() <= tol;
    if a.bbox.iter().zip(&expected).any(|(got, want)| !near(got - want, 1.0)) {
        out.push(Finding::error(
            &entity,
            format!("bbox {:?} differs from rasterized bbox {:?}", a.bbox, expected),
        ));
    }
    let area = mask.area() as f64;
    if !near(a.area - area, 0.01 * area) {
        out.push(Finding::error(
            &entity,
            format!("area {} differs from rasterized area {area} by more than 1%", a.area),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coco::{Category, Geometry};
    use crate::geometry::{PixelMask, Polygon};

    fn doc() -> DatasetDoc {
        let scheme = HeightClassScheme::default();
        let mut inst = Instance::from_mask(
            1,
            1,
            1,
            crate::geometry::rasterize(&Polygon::rect(0.0, 0.0, 4.0, 4.0), 8, 8).unwrap(),
        )
        .with_height(10.0);
        inst.geometry = Some(Geometry::Polygon(Polygon::rect(0.0, 0.0, 4.0, 4.0)));
        DatasetDoc {
            images: vec![ImageRecord::new(1, "a.png", 8, 8)],
            annotations: vec![inst],
            categories: scheme.categories(),
            ..Default::default()
        }
    }

    #[test]
    fn clean_document_has_no_findings() {
        assert!(validate_dataset(&doc(), Some(&HeightClassScheme::default())).is_empty());
    }

    #[test]
    fn class_height_mismatch_warns() {
        let mut d = doc();
        d.annotations[0].height_m = Some(50.0);
        let f = validate_dataset(&d, Some(&HeightClassScheme::default()));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, crate::coco::Severity::Warning);
        // a single-category table is never cross-checked
        d.categories = vec![Category::new(1, "building")];
        assert!(validate_dataset(&d, Some(&HeightClassScheme::default())).is_empty());
    }

    #[test]
    fn extent_tolerances() {
        let mut d = doc();
        d.annotations[0].bbox = [1.0, 0.0, 4.0, 5.0];
        assert!(validate_dataset(&d, None).is_empty());
        d.annotations[0].bbox = [2.0, 0.0, 4.0, 4.0];
        assert_eq!(validate_dataset(&d, None).len(), 1);
        let mut d = doc();
        d.annotations[0].area = 16.1;
        assert!(validate_dataset(&d, None).is_empty());
        d.annotations[0].area = 17.0;
        assert_eq!(validate_dataset(&d, None).len(), 1);
    }

    #[test]
    fn invariant_violations_name_the_entity() {
        let mut d = doc();
        d.images.push(ImageRecord::new(1, "dup.png", 8, 8));
        d.images.push(ImageRecord::new(3, "bad.png", 0, 8));
        d.annotations[0].score = Some(0.3);
        d.annotations
            .push(Instance::from_mask(2, 1, 9, PixelMask::empty(8, 8).unwrap()));
        let f = validate_dataset(&d, None);
        let text: Vec<String> = f.iter().map(|f| f.to_string()).collect();
        assert!(text.iter().any(|t| t.contains("image 1\tduplicate image id 1")));
        assert!(text.iter().any(|t| t.contains("image 3\tinvalid size 0x8")));
        assert!(text
            .iter()
            .any(|t| t.contains("annotation 1\tground-truth annotation carries a score")));
        assert!(text
            .iter()
            .any(|t| t.contains("annotation 2\tcategory_id 9 does not exist")));
        assert!(text
            .iter()
            .any(|t| t.contains("annotation 2\tgeometry covers no pixel")));
    }
}
