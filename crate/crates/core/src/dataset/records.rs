use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::AttributeSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Split> {
        match s.trim() {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One image and its target vector, overall score first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: PathBuf,
    pub raw_targets: Vec<f64>,
    pub normalized_targets: Vec<f64>,
    pub split: Option<Split>,
}

impl ImageRecord {
    pub fn new(image: impl Into<PathBuf>, raw: Vec<f64>, schema: &AttributeSchema) -> Result<Self> {
        let normalized_targets = schema.normalize(&raw)?;
        Ok(ImageRecord {
            image: image.into(),
            raw_targets: raw,
            normalized_targets,
            split: None,
        })
    }
}

/// Reads a manifest CSV with header `image,overall,<attributes...>[,split]`.
///
/// Attribute columns are matched by name, so their order in the file is
/// free; every schema attribute must be present.
pub fn load_manifest(path: &Path, schema: &AttributeSchema) -> Result<Vec<ImageRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(csv_err)?.clone();

    if header.get(0) != Some("image") || header.get(1) != Some("overall") {
        return Err(Error::Schema(format!(
            "{}: header must start with `image,overall`",
            path.display()
        )));
    }
    let wanted: HashMap<&str, usize> = schema
        .attribute_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i + 1))
        .collect();
    // column index -> target index
    let mut columns: Vec<(usize, usize)> = vec![(1, 0)];
    let mut split_col = None;
    for (col, name) in header.iter().enumerate().skip(2) {
        if name == "split" {
            split_col = Some(col);
        } else if let Some(&target) = wanted.get(name) {
            if columns.iter().any(|&(_, t)| t == target) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            columns.push((col, target));
        } else {
            return Err(Error::Schema(format!(
                "{}: unknown attribute column `{name}` for schema {}",
                path.display(),
                schema.benchmark
            )));
        }
    }
    if columns.len() != schema.num_targets() {
        let missing: Vec<&str> = schema
            .attribute_names
            .iter()
            .enumerate()
            .filter(|(i, _)| !columns.iter().any(|&(_, t)| t == i + 1))
            .map(|(_, n)| n.as_str())
            .collect();
        return Err(Error::Schema(format!(
            "{}: missing attribute columns: {}",
            path.display(),
            missing.join(", ")
        )));
    }

    let names = schema.target_names();
    let mut records = Vec::new();
    for (row_index, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let row_no = row_index + 1;
        let invalid = |column: &str, message: String| Error::Validation {
            path: path.to_path_buf(),
            row: row_no,
            column: column.to_string(),
            message,
        };
        let image = row.get(0).unwrap_or_default();
        if image.is_empty() {
            return Err(invalid("image", "empty image path".into()));
        }
        let mut raw = vec![0.0; schema.num_targets()];
        for &(col, target) in &columns {
            let cell = row.get(col).unwrap_or_default();
            let value: f64 = cell
                .parse()
                .map_err(|_| invalid(&names[target], format!("not a number: `{cell}`")))?;
            let map = schema.target_map(target);
            if !value.is_finite() || !map.contains(value) {
                return Err(invalid(
                    &names[target],
                    format!("value {value} outside raw range [{}, {}]", map.min, map.max),
                ));
            }
            raw[target] = value;
        }
        let split = match split_col {
            Some(col) => {
                let cell = row.get(col).unwrap_or_default();
                Some(
                    Split::parse(cell)
                        .ok_or_else(|| invalid("split", format!("unknown split `{cell}`")))?,
                )
            }
            None => None,
        };
        let mut record = ImageRecord::new(image, raw, schema)?;
        record.split = split;
        records.push(record);
    }
    Ok(records)
}

/// Writes records back out in manifest form; the split column is
/// emitted when every record carries one.
pub fn write_manifest(path: &Path, records: &[ImageRecord], schema: &AttributeSchema) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let with_split = !records.is_empty() && records.iter().all(|r| r.split.is_some());
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["image".to_string()];
    header.extend(schema.target_names());
    if with_split {
        header.push("split".into());
    }
    writer.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.image.to_string_lossy().into_owned()];
        row.extend(r.raw_targets.iter().map(|v| v.to_string()));
        if with_split {
            row.push(r.split.map(Split::as_str).unwrap_or_default().to_string());
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
