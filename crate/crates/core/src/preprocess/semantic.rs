//! Semantic building masks to per-building instance masks.

use crate::geometry::{adaptive_threshold, connected_components, Connectivity, PixelMask, ProbabilityMap};

use super::{PreprocessError, Result};

pub enum SemanticInput {
    Probability(ProbabilityMap),
    Binary(PixelMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticParams {
    /// Odd side length of the adaptive-threshold window.
    pub window: u32,
    pub offset: f64,
    pub connectivity: Connectivity,
    /// Components smaller than this many pixels are dropped.
    pub min_area: u64,
}

impl Default for SemanticParams {
    fn default() -> Self {
        Self {
            window: 51,
            offset: 0.0,
            connectivity: Connectivity::Eight,
            min_area: 0,
        }
    }
}

/// Thresholds (unless already binary) and splits a semantic map into
/// building masks, ordered by first pixel in row-major order.
pub fn semantic_to_instances(input: &SemanticInput, params: &SemanticParams) -> Result<Vec<PixelMask>> {
    if !params.offset.is_finite() {
        return Err(PreprocessError::InvalidConfig(format!(
            "offset {} is not finite",
            params.offset
        )));
    }
    let binary = match input {
        SemanticInput::Binary(m) => m.clone(),
        SemanticInput::Probability(p) if p.is_binary() => p.to_mask()?,
        SemanticInput::Probability(p) => adaptive_threshold(p, params.window, params.offset)?,
    };
    let mut parts = connected_components(&binary, params.connectivity)?;
    parts.retain(|m| m.area() >= params.min_area);
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&str]) -> PixelMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let px: Vec<bool> = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        PixelMask::from_row_major(w, h, &px).unwrap()
    }

    #[test]
    fn two_blobs() {
        let m = grid(&["##...", "##...", ".....", "...##"]);
        let out = semantic_to_instances(&SemanticInput::Binary(m), &SemanticParams::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].area(), 4);
        assert_eq!(out[1].area(), 2);
    }

    #[test]
    fn empty_map() {
        let p = ProbabilityMap::constant(8, 8, 0.0).unwrap();
        let out = semantic_to_instances(&SemanticInput::Probability(p), &SemanticParams::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn diagonal_connectivity() {
        let m = grid(&["#..", ".#.", "..."]);
        let four = SemanticParams {
            connectivity: Connectivity::Four,
            ..Default::default()
        };
        assert_eq!(
            semantic_to_instances(&SemanticInput::Binary(m.clone()), &four)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            semantic_to_instances(&SemanticInput::Binary(m), &SemanticParams::default())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn min_area_drops_specks() {
        let m = grid(&["##...", "##...", ".....", "....#"]);
        let p = SemanticParams {
            min_area: 2,
            ..Default::default()
        };
        assert_eq!(semantic_to_instances(&SemanticInput::Binary(m), &p).unwrap().len(), 1);
    }

    #[test]
    fn probability_maps_are_thresholded() {
        let mut v = vec![0.1; 64];
        for y in 2..5 {
            for x in 2..5 {
                v[y * 8 + x] = 0.9;
            }
        }
        let p = ProbabilityMap::new(8, 8, v).unwrap();
        let params = SemanticParams {
            window: 7,
            ..Default::default()
        };
        let out = semantic_to_instances(&SemanticInput::Probability(p), &params).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].area(), 9);
    }
}
