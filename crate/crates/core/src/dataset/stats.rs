use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::records::{ImageRecord, Split};
use crate::dataset::split::Partition;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Benchmark, UnitMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub target: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Attribute level counts; absent for the overall score.
    pub levels: Option<BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub benchmark: Benchmark,
    pub schema_id: String,
    pub images: usize,
    pub split_sizes: BTreeMap<String, usize>,
    pub targets: Vec<TargetStats>,
}

impl DatasetStatistics {
    pub fn target(&self, name: &str) -> Option<&TargetStats> {
        self.targets.iter().find(|t| t.target == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("statistics serialize")
    }
}

/// Level label for one raw attribute value. Signed ranges count by sign,
/// `[0, ..]` ranges count presence, others round to the nearest integer
/// level.
fn level(map: &UnitMap, v: f64) -> String {
    if map.min < 0.0 {
        match v.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => "negative".into(),
            Some(std::cmp::Ordering::Greater) => "positive".into(),
            _ => "zero".into(),
        }
    } else if map.min == 0.0 {
        if v > 0.0 { "present" } else { "absent" }.into()
    } else {
        format!("{}", v.round() as i64)
    }
}

/// Per-target summaries over every record plus the split sizes.
pub fn dataset_statistics(partition: &Partition, schema: &AttributeSchema) -> Result<DatasetStatistics> {
    let all: Vec<&ImageRecord> = Split::ALL.iter().flat_map(|&s| partition.get(s)).collect();
    if all.is_empty() {
        return Err(Error::Invalid("no records to summarize".into()));
    }
    let names = schema.target_names();
    let mut targets = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let mut values: Vec<f64> = all.iter().map(|r| r.raw_targets[t]).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let levels = (t > 0).then(|| {
            let map = schema.target_map(t);
            let mut counts = BTreeMap::new();
            for &v in &values {
                *counts.entry(level(&map, v)).or_insert(0) += 1;
            }
            counts
        });
        // order-independent mean
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        targets.push(TargetStats {
            target: name.clone(),
            min,
            max,
            mean,
            levels,
        });
    }
    Ok(DatasetStatistics {
        benchmark: schema.benchmark,
        schema_id: schema.id(),
        images: all.len(),
        split_sizes: Split::ALL
            .iter()
            .map(|&s| (s.as_str().to_string(), partition.get(s).len()))
            .collect(),
        targets,
    })
}
