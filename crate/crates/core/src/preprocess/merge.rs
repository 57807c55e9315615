//! Merging of overlapping annotations, keeping the tallest height.
//!
//! Plain IOU is tiny when a small annotation sits inside a large one, so the
//! overlap test uses the intersection over each annotation's own area and
//! takes the larger ratio. Instances linked by that test, directly or through
//! a chain, collapse into one instance whose mask is the union of the group
//! and whose height is the group's maximum.

use std::collections::BTreeMap;

use crate::coco::{instance_to_mask, DatasetDoc, Geometry, HeightClassScheme, ImageRecord, Instance};
use crate::geometry::{max_overlap_ratio, union_masks, BoundingBox, PixelMask};

use super::{PreprocessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    /// Instances are linked when their max overlap ratio exceeds this value.
    pub overlap_threshold: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { overlap_threshold: 0.5 }
    }
}

impl MergeConfig {
    pub fn new(overlap_threshold: f64) -> Result<Self> {
        if !(overlap_threshold > 0.0 && overlap_threshold <= 1.0) {
            return Err(PreprocessError::InvalidConfig(format!(
                "overlap threshold {overlap_threshold} must be in (0, 1]"
            )));
        }
        Ok(Self { overlap_threshold })
    }
}

/// One group of instances that were merged into a single instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeGroup {
    pub image_id: u64,
    /// Id of the merged instance (the tallest member's id).
    pub kept_id: u64,
    pub height_m: f64,
    pub category_id: u64,
    pub member_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    /// Surviving instances ordered by id.
    pub instances: Vec<Instance>,
    pub groups: Vec<MergeGroup>,
}

struct Cluster {
    members: Vec<usize>,
    mask: PixelMask,
    bbox: Option<BoundingBox>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges the overlapping instances of one image.
///
/// Linking is repeated on the merged masks until no two remaining instances
/// overlap beyond the threshold, so running the merge again changes nothing.
pub fn merge_overlapping_annotations(
    instances: &[Instance],
    image: &ImageRecord,
    cfg: &MergeConfig,
    scheme: &HeightClassScheme,
) -> Result<MergeOutcome> {
    let mut clusters = Vec::with_capacity(instances.len());
    for (idx, inst) in instances.iter().enumerate() {
        if inst.height_m.is_none() {
            return Err(PreprocessError::MissingHeight(inst.id));
        }
        let mask = instance_to_mask(inst, image)?;
        clusters.push(Cluster {
            members: vec![idx],
            bbox: mask.bbox(),
            mask,
        });
    }

    loop {
        let n = clusters.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut linked = false;
        for i in 0..n {
            let Some(bi) = clusters[i].bbox else { continue };
            for j in i + 1..n {
                let Some(bj) = clusters[j].bbox else { continue };
                if !bi.overlaps(&bj) {
                    continue;
                }
                if max_overlap_ratio(&clusters[i].mask, &clusters[j].mask)? > cfg.overlap_threshold {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                        linked = true;
                    }
                }
            }
        }
        if !linked {
            break;
        }
        let mut groups: BTreeMap<usize, Vec<Cluster>> = BTreeMap::new();
        for (i, c) in clusters.into_iter().enumerate() {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(c);
        }
        clusters = groups
            .into_values()
            .map(|group| {
                if group.len() == 1 {
                    return Ok(group.into_iter().next().unwrap());
                }
                let mask = union_masks(group.iter().map(|c| &c.mask))?;
                let members = group.into_iter().flat_map(|c| c.members).collect();
                Ok(Cluster {
                    members,
                    bbox: mask.bbox(),
                    mask,
                })
            })
            .collect::<Result<Vec<_>>>()?;
    }

    let mut out = Vec::with_capacity(clusters.len());
    let mut groups = Vec::new();
    for cluster in clusters {
        if cluster.members.len() == 1 {
            out.push(instances[cluster.members[0]].clone());
            continue;
        }
        let height = |i: usize| instances[i].height_m.unwrap_or(0.0);
        let tallest = *cluster
            .members
            .iter()
            .max_by(|&&a, &&b| {
                height(a)
                    .total_cmp(&height(b))
                    .then(instances[b].id.cmp(&instances[a].id))
            })
            .expect("cluster has members");
        let height_m = height(tallest);
        let category_id = scheme.class_of(height_m)?;
        let mut merged = instances[tallest].clone();
        merged.category_id = category_id;
        merged.height_m = Some(height_m);
        merged.refresh_extent(&cluster.mask);
        merged.geometry = Some(Geometry::Mask(cluster.mask));
        let mut member_ids: Vec<u64> = cluster.members.iter().map(|&i| instances[i].id).collect();
        member_ids.sort_unstable();
        groups.push(MergeGroup {
            image_id: image.id,
            kept_id: merged.id,
            height_m,
            category_id,
            member_ids,
        });
        out.push(merged);
    }
    out.sort_by_key(|i| i.id);
    groups.sort_by_key(|g| g.kept_id);
    Ok(MergeOutcome { instances: out, groups })
}

/// Applies [`merge_overlapping_annotations`] to every image of a corpus.
///
/// Annotation order in the output follows image order, then instance id.
pub fn merge_dataset(
    doc: &DatasetDoc,
    cfg: &MergeConfig,
    scheme: &HeightClassScheme,
) -> Result<(DatasetDoc, Vec<MergeGroup>)> {
    use rayon::prelude::*;

    if let Some(orphan) = doc.annotations.iter().find(|a| doc.image(a.image_id).is_none()) {
        return Err(PreprocessError::UnknownImage(orphan.image_id));
    }
    let by_image = doc.annotations_by_image();
    let results: Vec<MergeOutcome> = doc
        .images
        .par_iter()
        .map(|img| {
            let members: Vec<Instance> = by_image
                .get(&img.id)
                .map(|v| v.iter().map(|&i| i.clone()).collect())
                .unwrap_or_default();
            merge_overlapping_annotations(&members, img, cfg, scheme)
        })
        .collect::<Result<_>>()?;
    let mut out = doc.clone();
    out.annotations.clear();
    let mut groups = Vec::new();
    for r in results {
        out.annotations.extend(r.instances);
        groups.extend(r.groups);
    }
    Ok((out, groups))
}
