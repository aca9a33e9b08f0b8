use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub percentages: Vec<f64>,
}

impl FrequencyTable {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,count,percentage\n");
        for (i, (&c, &p)) in self.counts.iter().zip(&self.percentages).enumerate() {
            out.push_str(&format!("{},{},{c},{p}\n", self.edges[i], self.edges[i + 1]));
        }
        out
    }
}

/// Bins `scores` into `[e_i, e_{i+1})`, the last bin closed on the right.
pub fn interval_frequencies(scores: &[f64], edges: &[f64]) -> Result<FrequencyTable> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::Invalid("bin edges must be strictly increasing".into()));
    }
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        if !(s >= lo && s <= hi) {
            return Err(Error::Invalid(format!("score {s} outside [{lo}, {hi}]")));
        }
        // first edge strictly greater than s, minus one
        let bin = edges.partition_point(|&e| e <= s).saturating_sub(1).min(bins - 1);
        counts[bin] += 1;
    }
    let n = scores.len();
    let percentages = counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect();
    Ok(FrequencyTable {
        edges: edges.to_vec(),
        counts,
        percentages,
    })
}
