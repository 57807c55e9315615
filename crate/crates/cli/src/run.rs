//! Per-invocation bookkeeping: input digests, output files and the
//! provenance record written next to them.

use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{operational, usage, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// One command invocation writing into one output directory.
///
/// Provenance names inputs by file name, not full path, so reruns from a
/// different working directory produce identical bytes. No timestamps are
/// recorded.
pub struct Run {
    command: &'static str,
    config: Value,
    notes: Map<String, Value>,
    inputs: Vec<Value>,
    out_dir: PathBuf,
    outputs: Vec<(String, String)>,
}

impl Run {
    pub fn new(command: &'static str, cfg: &PipelineConfig, out_dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| operational(format!("cannot create output directory {}: {e}", out_dir.display())))?;
        Ok(Self {
            command,
            config: cfg.to_json(),
            notes: Map::new(),
            inputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    /// Reads an input file and records its digest under `role`. A missing
    /// file is a usage error; other read failures are operational.
    pub fn read_input(&mut self, role: &str, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            ErrorKind::NotFound => usage(format!("{role} input {} does not exist", path.display())),
            _ => operational(format!("cannot read {role} input {}: {e}", path.display())),
        })?;
        self.record_input(role, path, &bytes);
        Ok(bytes)
    }

    pub fn record_input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push(json!({
            "role": role,
            "file": display_name(path),
            "sha256": sha256_hex(bytes),
        }));
    }

    /// Adds a command-specific field (sample selection, counts) to the
    /// provenance record.
    pub fn note(&mut self, key: &str, value: Value) {
        self.notes.insert(key.to_string(), value);
    }

    pub fn provenance(&self) -> Value {
        let mut p = Map::new();
        p.insert("tool".into(), json!(format!("geoseg {}", env!("CARGO_PKG_VERSION"))));
        p.insert("command".into(), json!(self.command));
        p.insert("config".into(), self.config.clone());
        p.insert("inputs".into(), Value::Array(self.inputs.clone()));
        for (k, v) in &self.notes {
            p.insert(k.clone(), v.clone());
        }
        Value::Object(p)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `bytes` to `name` under the output directory, creating parent
    /// directories as needed.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.out_path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| operational(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| operational(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Writes `provenance.json` listing the configuration, the inputs and a
    /// digest of every file written by this run.
    pub fn finish(mut self) -> CliResult<()> {
        let mut p = self.provenance();
        let outputs: Vec<Value> = self
            .outputs
            .iter()
            .map(|(name, sha)| json!({"file": name, "sha256": sha}))
            .collect();
        p["outputs"] = Value::Array(outputs);
        let mut bytes = serde_json::to_vec_pretty(&p).expect("provenance is serializable");
        bytes.push(b'\n');
        self.write("provenance.json", &bytes)
    }
}
