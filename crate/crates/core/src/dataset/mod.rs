//! Label ingestion, normalization, splitting and batch assembly.

pub mod batch;
pub mod image;
pub mod records;
pub mod split;
pub mod stats;
pub mod votes;

pub use batch::{assemble_batch, epoch_plan, EncodedBatch, InMemorySource, RecordSource, SampleSource};
pub use image::{augment_flip, encode_image, encode_rgb, preprocess};
pub use records::{load_manifest, write_manifest, ImageRecord, Split};
pub use split::{split_dataset, Partition};
pub use stats::{dataset_statistics, DatasetStatistics, TargetStats};
pub use votes::{average_votes, load_votes, records_from_averages, VoteTable};

use std::path::Path;

use crate::error::Result;
use crate::schema::{AttributeSchema, Benchmark};

/// Normalizes a raw target vector; see [`AttributeSchema::normalize`].
pub fn normalize_targets(raw: &[f64], schema: &AttributeSchema) -> Result<Vec<f64>> {
    schema.normalize(raw)
}

/// Loads labels for a benchmark: EVA from per-rater votes (averaged), the
/// others from a manifest. Returns the averages too when votes were used.
#[allow(clippy::type_complexity)]
pub fn load_labels(
    schema: &AttributeSchema,
    manifest: Option<&Path>,
    votes: Option<&Path>,
) -> Result<(Vec<ImageRecord>, Option<Vec<(String, Vec<f64>)>>)> {
    match (schema.benchmark, votes, manifest) {
        (Benchmark::Eva, Some(v), _) | (Benchmark::Custom, Some(v), None) => {
            let table = load_votes(v, schema)?;
            let averages = average_votes(&table)?;
            let records = records_from_averages(&averages, schema)?;
            Ok((records, Some(averages)))
        }
        (_, _, Some(m)) => Ok((load_manifest(m, schema)?, None)),
        _ => Err(crate::Error::Config(format!(
            "{} needs a {}",
            schema.benchmark,
            if schema.benchmark == Benchmark::Eva { "vote file" } else { "manifest" }
        ))),
    }
}
