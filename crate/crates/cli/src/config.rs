//! Layered pipeline configuration addressed by dotted keys.
//!
//! Layers apply in order: built-in defaults, a JSON config file, then
//! command-line flags. A config file may nest objects (`{"tile": {"size":
//! 256}}`) or spell keys flat (`{"tile.size": 256}`); both resolve to the same
//! dotted key. Unknown keys are rejected at every layer.

use std::path::Path;

use geoseg_core::coco::HeightClassScheme;
use geoseg_core::evaluation::{EvalConfig, GeometryMode};
use geoseg_core::geometry::Connectivity;
use geoseg_core::preprocess::{MergeConfig, SemanticParams, TileSpec};
use geoseg_core::quality::QualityConfig;
use serde_json::{json, Map, Value};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub height_edges: Vec<f64>,
    pub merge: MergeConfig,
    pub tile: TileSpec,
    pub semantic: SemanticParams,
    pub filter: QualityConfig,
    pub eval: EvalConfig,
    pub stats_bin_width: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            height_edges: HeightClassScheme::default().edges().to_vec(),
            merge: MergeConfig::default(),
            tile: TileSpec::default(),
            semantic: SemanticParams::default(),
            filter: QualityConfig::default(),
            eval: EvalConfig::default(),
            stats_bin_width: 5.0,
        }
    }
}

/// Every accepted key, in the order used when echoing the configuration.
pub const KEYS: &[&str] = &[
    "heights.edges",
    "merge.overlap_threshold",
    "tile.size",
    "tile.min_clipped_area_ratio",
    "tile.pad_value",
    "semantic.window",
    "semantic.offset",
    "semantic.connectivity",
    "semantic.min_area",
    "filter.iou_threshold",
    "filter.discard_ratio",
    "filter.score_threshold",
    "eval.iou_threshold",
    "eval.score_threshold",
    "eval.mode",
    "eval.group_matching",
    "stats.bin_width",
];

fn as_f64(key: &str, v: &Value) -> CliResult<f64> {
    v.as_f64()
        .ok_or_else(|| usage(format!("{key}: expected a number, got {v}")))
}

fn as_u64(key: &str, v: &Value) -> CliResult<u64> {
    v.as_u64()
        .ok_or_else(|| usage(format!("{key}: expected a non-negative integer, got {v}")))
}

fn as_u32(key: &str, v: &Value) -> CliResult<u32> {
    u32::try_from(as_u64(key, v)?).map_err(|_| usage(format!("{key}: {v} is out of range")))
}

impl PipelineConfig {
    /// Loads defaults, then the file at `path` when given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let bytes =
                std::fs::read(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let value: Value = serde_json::from_slice(&bytes)
                .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
            let Value::Object(map) = value else {
                return Err(usage(format!("config {} must be a JSON object", path.display())));
            };
            cfg.apply_object("", &map)?;
        }
        Ok(cfg)
    }

    fn apply_object(&mut self, prefix: &str, map: &Map<String, Value>) -> CliResult<()> {
        for (k, v) in map {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                Value::Object(inner) if !KEYS.contains(&key.as_str()) => self.apply_object(&key, inner)?,
                _ => self.set(&key, v)?,
            }
        }
        Ok(())
    }

    /// Applies a `key=value` assignment; the value is read as JSON, falling
    /// back to a bare string.
    pub fn set_str(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), &value)
    }

    pub fn set(&mut self, key: &str, v: &Value) -> CliResult<()> {
        match key {
            "heights.edges" => {
                let edges = v
                    .as_array()
                    .ok_or_else(|| usage(format!("{key}: expected a list of numbers, got {v}")))?
                    .iter()
                    .map(|e| as_f64(key, e))
                    .collect::<CliResult<Vec<f64>>>()?;
                self.height_edges = edges;
            }
            "merge.overlap_threshold" => self.merge.overlap_threshold = as_f64(key, v)?,
            "tile.size" => self.tile.tile_size = as_u32(key, v)?,
            "tile.min_clipped_area_ratio" => self.tile.min_clipped_area_ratio = as_f64(key, v)?,
            "tile.pad_value" => {
                self.tile.pad_value =
                    u8::try_from(as_u64(key, v)?).map_err(|_| usage(format!("{key}: {v} exceeds 255")))?
            }
            "semantic.window" => self.semantic.window = as_u32(key, v)?,
            "semantic.offset" => self.semantic.offset = as_f64(key, v)?,
            "semantic.connectivity" => {
                let n = as_u64(key, v)?;
                self.semantic.connectivity = u8::try_from(n)
                    .ok()
                    .and_then(Connectivity::from_neighbours)
                    .ok_or_else(|| usage(format!("{key}: expected 4 or 8, got {v}")))?;
            }
            "semantic.min_area" => self.semantic.min_area = as_u64(key, v)?,
            "filter.iou_threshold" => self.filter.iou_threshold = as_f64(key, v)?,
            "filter.discard_ratio" => self.filter.discard_ratio = as_f64(key, v)?,
            "filter.score_threshold" => self.filter.score_threshold = as_f64(key, v)?,
            "eval.iou_threshold" => self.eval.iou_threshold = as_f64(key, v)?,
            "eval.score_threshold" => self.eval.score_threshold = as_f64(key, v)?,
            "eval.mode" => {
                let s = v
                    .as_str()
                    .ok_or_else(|| usage(format!("{key}: expected a string, got {v}")))?;
                self.eval.geometry_mode = s.parse().map_err(|e: String| usage(format!("{key}: {e}")))?;
            }
            "eval.group_matching" => {
                self.eval.enable_group_matching = v
                    .as_bool()
                    .ok_or_else(|| usage(format!("{key}: expected true or false, got {v}")))?
            }
            "stats.bin_width" => self.stats_bin_width = as_f64(key, v)?,
            _ => {
                return Err(usage(format!(
                    "unknown config key {key:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> CliResult<HeightClassScheme> {
        HeightClassScheme::new(self.height_edges.clone()).map_err(|e| usage(format!("heights.edges: {e}")))
    }

    /// Checks every section, so a bad value fails before any work starts.
    pub fn validate(&self) -> CliResult<()> {
        self.scheme()?;
        MergeConfig::new(self.merge.overlap_threshold).map_err(|e| usage(format!("merge.overlap_threshold: {e}")))?;
        self.tile.validate().map_err(|e| usage(format!("tile: {e}")))?;
        let w = self.semantic.window;
        if w < 3 || w.is_multiple_of(2) {
            return Err(usage(format!("semantic.window {w} must be odd and at least 3")));
        }
        if !self.semantic.offset.is_finite() {
            return Err(usage(format!(
                "semantic.offset {} must be finite",
                self.semantic.offset
            )));
        }
        self.filter.validate().map_err(|e| usage(format!("filter: {e}")))?;
        self.eval.validate().map_err(|e| usage(format!("eval: {e}")))?;
        let bw = self.stats_bin_width;
        if !(bw.is_finite() && bw > 0.0) {
            return Err(usage(format!("stats.bin_width {bw} must be positive")));
        }
        Ok(())
    }

    /// Flat `{dotted key: value}` view of the effective configuration.
    pub fn to_json(&self) -> Value {
        let mode = match self.eval.geometry_mode {
            GeometryMode::Bbox => "bbox",
            GeometryMode::Mask => "mask",
        };
        let values = [
            json!(self.height_edges),
            json!(self.merge.overlap_threshold),
            json!(self.tile.tile_size),
            json!(self.tile.min_clipped_area_ratio),
            json!(self.tile.pad_value),
            json!(self.semantic.window),
            json!(self.semantic.offset),
            json!(self.semantic.connectivity.neighbours()),
            json!(self.semantic.min_area),
            json!(self.filter.iou_threshold),
            json!(self.filter.discard_ratio),
            json!(self.filter.score_threshold),
            json!(self.eval.iou_threshold),
            json!(self.eval.score_threshold),
            json!(mode),
            json!(self.eval.enable_group_matching),
            json!(self.stats_bin_width),
        ];
        let map: Map<String, Value> = KEYS.iter().map(|k| k.to_string()).zip(values).collect();
        Value::Object(map)
    }
}
