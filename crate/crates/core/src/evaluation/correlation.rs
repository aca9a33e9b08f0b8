use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::spearman::spearman_rho;

/// Pairwise Spearman correlations between the columns of a score table.
/// Entries involving a constant column are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == row)?;
        let j = self.labels.iter().position(|l| l == col)?;
        self.values[i][j]
    }

    /// Labels of columns whose correlations are undefined.
    pub fn undefined_columns(&self) -> Vec<&str> {
        self.labels
            .iter()
            .zip(&self.values)
            .filter(|(_, row)| row.iter().all(Option::is_none))
            .map(|(l, _)| l.as_str())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("target,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.values) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into()))
                .collect();
            out.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        out
    }
}

/// `columns[j]` holds column `j` of the table, all of equal length.
pub fn attribute_correlation_matrix(columns: &[Vec<f64>], labels: &[String]) -> Result<CorrelationMatrix> {
    if columns.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} columns but {} labels",
            columns.len(),
            labels.len()
        )));
    }
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("score table columns differ in length".into()));
    }
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!("need at least 2 rows, got {n}")));
    }
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let rho = match spearman_rho(&columns[i], &columns[j]) {
                Ok(r) => Some(if i == j { 1.0 } else { r }),
                Err(Error::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            };
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(CorrelationMatrix {
        labels: labels.to_vec(),
        values,
    })
}
