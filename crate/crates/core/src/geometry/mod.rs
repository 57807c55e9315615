//! Exact raster geometry for instance masks.
//!
//! Masks are stored as COCO-style uncompressed run-length encodings: counts in
//! column-major order, alternating background/foreground, starting with a
//! (possibly empty) background run. All overlap metrics work directly on the
//! runs without decoding to a bitmap.

mod components;
mod mask;
mod polygon;
mod threshold;

pub use components::{connected_components, Connectivity};
pub use mask::{intersection_area, iou, max_overlap_ratio, union_masks, BoundingBox, PixelMask};
pub use polygon::{rasterize, Polygon};
pub use threshold::{adaptive_threshold, ProbabilityMap};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },
    #[error("invalid mask dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("run-length counts sum to {actual}, expected {expected}")]
    RunLengthMismatch { expected: u64, actual: u64 },
    #[error("invalid compressed run-length string: {0}")]
    InvalidRleString(String),
    #[error("undefined IOU: both masks are empty")]
    UndefinedIou,
    #[error("empty mask: overlap ratio is undefined")]
    EmptyMask,
    #[error("union of an empty list of masks")]
    EmptyInput,
    #[error("invalid threshold window {window}: must be odd, >= 3 and <= {max}")]
    InvalidWindow { window: u32, max: u32 },
    #[error("probability value {value} at index {index} outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("unsupported probability map image: {0}")]
    UnsupportedImage(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
