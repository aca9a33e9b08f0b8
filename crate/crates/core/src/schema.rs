//! Per-benchmark declaration of target names, raw scales and the affine
//! maps that bring every target onto the unit interval.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Aadb,
    Eva,
    Custom,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Aadb => "aadb",
            Benchmark::Eva => "eva",
            Benchmark::Custom => "custom",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aadb" => Ok(Benchmark::Aadb),
            "eva" => Ok(Benchmark::Eva),
            "custom" => Ok(Benchmark::Custom),
            other => Err(Error::Config(format!("unknown benchmark `{other}`"))),
        }
    }
}

/// Strictly increasing affine map from a raw interval onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitMap {
    pub min: f64,
    pub max: f64,
}

impl UnitMap {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Schema(format!("invalid raw range [{min}, {max}]")));
        }
        Ok(UnitMap { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        u * (self.max - self.min) + self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub benchmark: Benchmark,
    pub attribute_names: Vec<String>,
    pub overall: UnitMap,
    pub attributes: Vec<UnitMap>,
    /// Interval edges for ground-truth frequency tables, in raw scale.
    pub frequency_edges: Vec<f64>,
}

/// On-disk form of a schema declaration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    benchmark: Benchmark,
    attributes: Vec<String>,
    overall_range: [f64; 2],
    attribute_ranges: Vec<[f64; 2]>,
    #[serde(default)]
    frequency_edges: Option<Vec<f64>>,
}

pub const AADB_ATTRIBUTES: [&str; 11] = [
    "balancing_elements",
    "content",
    "color_harmony",
    "depth_of_field",
    "light",
    "motion_blur",
    "object_emphasis",
    "rule_of_thirds",
    "vivid_color",
    "repetition",
    "symmetry",
];

pub const EVA_ATTRIBUTES: [&str; 4] = [
    "light_and_color",
    "composition_and_depth",
    "quality",
    "semantics",
];

impl AttributeSchema {
    /// AADB labels as distributed: overall, repetition and symmetry in
    /// [0, 1], every other attribute in [-1, 1].
    pub fn aadb() -> Self {
        let attributes = AADB_ATTRIBUTES
            .iter()
            .map(|name| match *name {
                "repetition" | "symmetry" => UnitMap { min: 0.0, max: 1.0 },
                _ => UnitMap {
                    min: -1.0,
                    max: 1.0,
                },
            })
            .collect();
        let mut frequency_edges = vec![0.05];
        frequency_edges.extend((1..=10).map(|i| i as f64 / 10.0));
        AttributeSchema {
            benchmark: Benchmark::Aadb,
            attribute_names: AADB_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            overall: UnitMap { min: 0.0, max: 1.0 },
            attributes,
            frequency_edges,
        }
    }

    /// EVA: overall on the 0-10 scale, attributes on a 1-4 Likert scale.
    pub fn eva() -> Self {
        let mut frequency_edges = vec![1.7];
        frequency_edges.extend((2..=9).map(f64::from));
        frequency_edges.push(9.5);
        AttributeSchema {
            benchmark: Benchmark::Eva,
            attribute_names: EVA_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            overall: UnitMap {
                min: 0.0,
                max: 10.0,
            },
            attributes: vec![UnitMap { min: 1.0, max: 4.0 }; EVA_ATTRIBUTES.len()],
            frequency_edges,
        }
    }

    pub fn builtin(benchmark: Benchmark) -> Option<Self> {
        match benchmark {
            Benchmark::Aadb => Some(Self::aadb()),
            Benchmark::Eva => Some(Self::eva()),
            Benchmark::Custom => None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.attributes.len() != file.attribute_ranges.len() {
            return Err(Error::Schema(format!(
                "{} attributes but {} attribute ranges",
                file.attributes.len(),
                file.attribute_ranges.len()
            )));
        }
        let overall = UnitMap::new(file.overall_range[0], file.overall_range[1])?;
        let attributes = file
            .attribute_ranges
            .iter()
            .map(|r| UnitMap::new(r[0], r[1]))
            .collect::<Result<Vec<_>>>()?;
        let frequency_edges = file
            .frequency_edges
            .unwrap_or_else(|| default_edges(overall, 10));
        let schema = AttributeSchema {
            benchmark: file.benchmark,
            attribute_names: file.attributes,
            overall,
            attributes,
            frequency_edges,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        let fmt_range = |m: &UnitMap| format!("[{:?}, {:?}]", m.min, m.max);
        let names: Vec<String> = self
            .attribute_names
            .iter()
            .map(|n| format!("{n:?}"))
            .collect();
        let ranges: Vec<String> = self.attributes.iter().map(fmt_range).collect();
        let edges: Vec<String> = self.frequency_edges.iter().map(|e| format!("{e:?}")).collect();
        format!(
            "benchmark = \"{}\"\nattributes = [{}]\noverall_range = {}\nattribute_ranges = [{}]\nfrequency_edges = [{}]\n",
            self.benchmark,
            names.join(", "),
            fmt_range(&self.overall),
            ranges.join(", "),
            edges.join(", ")
        )
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.benchmark {
            Benchmark::Aadb => Some(11),
            Benchmark::Eva => Some(4),
            Benchmark::Custom => None,
        };
        if let Some(k) = expected {
            if self.attribute_names.len() != k {
                return Err(Error::Schema(format!(
                    "{} declares {k} attributes, found {}",
                    self.benchmark,
                    self.attribute_names.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.attribute_names {
            if name == "overall" || name == "image" || name == "split" || !seen.insert(name) {
                return Err(Error::Schema(format!("duplicate or reserved attribute name `{name}`")));
            }
        }
        if self.frequency_edges.len() < 2
            || self.frequency_edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Schema("frequency edges must be strictly increasing".into()));
        }
        Ok(())
    }

    /// K, the number of attributes.
    pub fn num_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    /// K + 1.
    pub fn num_targets(&self) -> usize {
        self.attribute_names.len() + 1
    }

    /// Target labels in output order: `overall` then the attributes.
    pub fn target_names(&self) -> Vec<String> {
        std::iter::once("overall".to_string())
            .chain(self.attribute_names.iter().cloned())
            .collect()
    }

    pub fn target_map(&self, index: usize) -> UnitMap {
        if index == 0 {
            self.overall
        } else {
            self.attributes[index - 1]
        }
    }

    /// Stable identifier embedded in checkpoints.
    pub fn id(&self) -> String {
        format!("{}:{}", self.benchmark, self.attribute_names.join(","))
    }

    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check_len(raw.len())?;
        let names = self.target_names();
        raw.iter()
            .enumerate()
            .map(|(i, &v)| {
                let map = self.target_map(i);
                if !map.contains(v) {
                    return Err(Error::OutOfRange {
                        target: names[i].clone(),
                        value: v,
                        min: map.min,
                        max: map.max,
                    });
                }
                Ok(map.forward(v))
            })
            .collect()
    }

    pub fn denormalize(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        self.check_len(normalized.len())?;
        Ok(normalized
            .iter()
            .enumerate()
            .map(|(i, &u)| self.target_map(i).inverse(u))
            .collect())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.num_targets() {
            return Err(Error::Shape(format!(
                "expected {} targets, got {n}",
                self.num_targets()
            )));
        }
        Ok(())
    }
}

fn default_edges(map: UnitMap, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| map.min + (map.max - map.min) * i as f64 / bins as f64)
        .collect()
}
