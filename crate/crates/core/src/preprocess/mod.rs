//! Corpus preparation: overlap merging, height binning, tiling and
//! semantic-to-instance conversion.

mod merge;
mod semantic;
mod tile;

use thiserror::Error;

use crate::coco::{CocoError, HeightClassScheme};
use crate::geometry::GeometryError;

pub use merge::{merge_dataset, merge_overlapping_annotations, MergeConfig, MergeGroup, MergeOutcome};
pub use semantic::{semantic_to_instances, SemanticInput, SemanticParams};
pub use tile::{cut_tile_image, tile_dataset, TileManifestEntry, TileSpec, TiledDataset};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("instance {0} has no height_m")]
    MissingHeight(u64),
    #[error("image {0} does not exist")]
    UnknownImage(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Coco(#[from] CocoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

/// Height class (category id) of a building under `scheme`.
pub fn assign_height_class(height_m: f64, scheme: &HeightClassScheme) -> Result<u64> {
    Ok(scheme.class_of(height_m)?)
}
