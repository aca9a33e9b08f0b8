//! Per-rater vote tables and their reduction to per-image averages.

use std::collections::HashMap;
use std::path::Path;

use crate::dataset::records::ImageRecord;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Benchmark};

/// Minimum number of raters per EVA image; fewer triggers a warning.
pub const EVA_MIN_VOTES: usize = 30;

/// One rater's scores for one image. Empty cells are kept as `None` and
/// skipped when averaging that target.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub rater: String,
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageVotes {
    pub image: String,
    pub votes: Vec<Vote>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoteTable {
    pub target_names: Vec<String>,
    /// Images in order of first appearance.
    pub images: Vec<ImageVotes>,
}

impl VoteTable {
    pub fn num_votes(&self) -> usize {
        self.images.iter().map(|i| i.votes.len()).sum()
    }
}

/// Reads a vote CSV with header `image,rater,overall,<attributes...>`.
pub fn load_votes(path: &Path, schema: &AttributeSchema) -> Result<VoteTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(csv_err)?.clone();
    let names = schema.target_names();
    let expected: Vec<&str> = ["image", "rater"]
        .into_iter()
        .chain(names.iter().map(String::as_str))
        .collect();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Schema(format!(
            "{}: vote header must be `{}`, found `{}`",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }

    let mut table = VoteTable {
        target_names: names.clone(),
        images: Vec::new(),
    };
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row_index, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let invalid = |column: &str, message: String| Error::Validation {
            path: path.to_path_buf(),
            row: row_index + 1,
            column: column.to_string(),
            message,
        };
        let image = row.get(0).unwrap_or_default().to_string();
        if image.is_empty() {
            return Err(invalid("image", "empty image id".into()));
        }
        let rater = row.get(1).unwrap_or_default().to_string();
        let mut scores = Vec::with_capacity(names.len());
        for (t, name) in names.iter().enumerate() {
            let cell = row.get(t + 2).unwrap_or_default();
            if cell.is_empty() {
                scores.push(None);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| invalid(name, format!("not a number: `{cell}`")))?;
            let map = schema.target_map(t);
            if !v.is_finite() || !map.contains(v) {
                return Err(invalid(
                    name,
                    format!("vote {v} outside raw range [{}, {}]", map.min, map.max),
                ));
            }
            scores.push(Some(v));
        }
        let slot = *index.entry(image.clone()).or_insert_with(|| {
            table.images.push(ImageVotes {
                image: image.clone(),
                votes: Vec::new(),
            });
            table.images.len() - 1
        });
        table.images[slot].votes.push(Vote { rater, scores });
    }

    if schema.benchmark == Benchmark::Eva {
        let sparse = table
            .images
            .iter()
            .filter(|i| i.votes.len() < EVA_MIN_VOTES)
            .count();
        if sparse > 0 {
            log::warn!(
                "{}: {sparse} image(s) have fewer than {EVA_MIN_VOTES} votes",
                path.display()
            );
        }
    }
    Ok(table)
}

/// Arithmetic mean per target per image, in first-appearance order.
///
/// Values are summed in sorted order so the result does not depend on the
/// order votes were recorded in.
pub fn average_votes(table: &VoteTable) -> Result<Vec<(String, Vec<f64>)>> {
    let k1 = table.target_names.len();
    table
        .images
        .iter()
        .map(|img| {
            let mut means = Vec::with_capacity(k1);
            for t in 0..k1 {
                let mut values: Vec<f64> = img
                    .votes
                    .iter()
                    .filter_map(|v| v.scores.get(t).copied().flatten())
                    .collect();
                if values.is_empty() {
                    return Err(Error::EmptyVotes {
                        image: img.image.clone(),
                        target: table.target_names[t].clone(),
                    });
                }
                values.sort_by(f64::total_cmp);
                means.push(values.iter().sum::<f64>() / values.len() as f64);
            }
            Ok((img.image.clone(), means))
        })
        .collect()
}

/// Turns averaged votes into unsplit records.
pub fn records_from_averages(
    averages: &[(String, Vec<f64>)],
    schema: &AttributeSchema,
) -> Result<Vec<ImageRecord>> {
    averages
        .iter()
        .map(|(image, raw)| ImageRecord::new(image.as_str(), raw.clone(), schema))
        .collect()
}

/// Writes the per-image averages as `image,overall,<attributes...>`.
pub fn write_averages(path: &Path, averages: &[(String, Vec<f64>)], schema: &AttributeSchema) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["image".to_string()];
    header.extend(schema.target_names());
    w.write_record(&header).map_err(csv_err)?;
    for (image, means) in averages {
        let mut row = vec![image.clone()];
        row.extend(means.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
