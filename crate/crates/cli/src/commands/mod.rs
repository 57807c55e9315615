//! Subcommands. Each one reads its inputs, applies flag overrides on top of
//! the layered configuration, writes its outputs through a [`Run`] and
//! finishes with `provenance.json`.

pub mod convert;
pub mod evaluate;
pub mod filter;
pub mod merge;
pub mod stats;
pub mod tile;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use geoseg_core::coco::{parse_dataset, DatasetDoc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{usage, CliResult};
use crate::run::Run;

/// Seeded image selection shared by `tile` and `stats`.
#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Keep only N images chosen uniformly at random.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
    /// Seed for --sample; the same seed always selects the same images.
    #[arg(long, value_name = "S", requires = "sample")]
    pub seed: Option<u64>,
}

impl SampleArgs {
    /// Restricts `doc` to the sampled images, keeping their original order.
    pub fn apply(&self, mut doc: DatasetDoc, run: &mut Run) -> DatasetDoc {
        let Some(n) = self.sample else { return doc };
        let seed = self.seed.unwrap_or(0);
        let mut ids: Vec<u64> = doc.images.iter().map(|i| i.id).collect();
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen: BTreeSet<u64> = ids.choose_multiple(&mut rng, n.min(ids.len())).copied().collect();
        doc.images.retain(|i| chosen.contains(&i.id));
        doc.annotations.retain(|a| chosen.contains(&a.image_id));
        log::info!("sampled {} of {} images with seed {seed}", chosen.len(), ids.len());
        run.note(
            "sample",
            json!({"requested": n, "seed": seed, "image_ids": chosen.into_iter().collect::<Vec<_>>()}),
        );
        doc
    }
}

/// Output directory flag shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory receiving the outputs; created if missing.
    #[arg(long, short, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn load_dataset(run: &mut Run, role: &str, path: &Path) -> CliResult<DatasetDoc> {
    let bytes = run.read_input(role, path)?;
    parse_dataset(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Stamps the run's provenance into the dataset's `info` block.
pub fn stamp(doc: &mut DatasetDoc, run: &Run) {
    doc.info.insert("provenance".into(), run.provenance());
}

/// CSV bytes from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for row in rows {
        w.write_record(&row).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

pub fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}
