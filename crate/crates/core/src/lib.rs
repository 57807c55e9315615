//! Dataset preparation and evaluation for building-height instance
//! segmentation on satellite imagery.
//!
//! The crate is organised as a small pipeline:
//!
//! * [`geometry`] holds run-length encoded pixel masks and the raster
//!   operations on them (rasterization, overlap metrics, unions, connected
//!   components, adaptive thresholding).
//! * [`coco`] parses, validates and serializes COCO-style corpora that carry
//!   a per-instance building height.
//! * [`preprocess`] merges overlapping annotations, bins heights into
//!   classes, cuts scenes into fixed-size tiles and turns semantic maps into
//!   instances.
//! * [`quality`] screens images whose annotations disagree with a reference
//!   model.
//! * [`evaluation`] scores predictions: greedy matching, over/under-detection
//!   group matching, AP/mAP and a confusion matrix with a background class.

pub mod coco;
pub mod evaluation;
pub mod geometry;
pub mod preprocess;
pub mod quality;

pub use coco::{Category, DatasetDoc, Geometry, HeightClassScheme, ImageRecord, Instance};

pub use geometry::{Connectivity, GeometryError, PixelMask, Polygon, ProbabilityMap};
