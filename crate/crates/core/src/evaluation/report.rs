use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::batch::{assemble_batch, SampleSource};
use crate::error::{Error, Result};
use crate::evaluation::correlation::{attribute_correlation_matrix, CorrelationMatrix};
use crate::evaluation::frequency::{interval_frequencies, FrequencyTable};
use crate::evaluation::significance::rho_significance;
use crate::evaluation::spearman::spearman_rho;
use crate::model::network::{Mode, MultiTaskNetwork};
use crate::plot;
use crate::schema::{AttributeSchema, Benchmark};

pub const TRAINING_LABEL: &str = "training";
pub const FINE_TUNING_LABEL: &str = "fine-tuning";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCorrelation {
    pub target: String,
    pub rho: Option<f64>,
    /// Why `rho` is missing.
    pub error: Option<String>,
}

/// Results for one checkpoint on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEval {
    pub label: String,
    pub output_units: usize,
    pub correlations: Vec<TargetCorrelation>,
    pub overall_p_value: Option<f64>,
    /// Raw-scale range of the overall predictions.
    pub prediction_min: f64,
    pub prediction_max: f64,
    /// Raw-scale (ground truth, prediction) for the overall score.
    pub scatter: Vec<(f64, f64)>,
    pub prediction_correlations: Option<CorrelationMatrix>,
}

impl CheckpointEval {
    pub fn overall_rho(&self) -> Option<f64> {
        self.correlations.first().and_then(|c| c.rho)
    }

    pub fn rho(&self, target: &str) -> Option<f64> {
        self.correlations.iter().find(|c| c.target == target).and_then(|c| c.rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub benchmark: Benchmark,
    pub schema_id: String,
    pub target_names: Vec<String>,
    pub test_size: usize,
    pub ground_truth_frequencies: Option<FrequencyTable>,
    pub frequency_error: Option<String>,
    pub ground_truth_correlations: CorrelationMatrix,
    pub checkpoints: Vec<CheckpointEval>,
}

impl EvalReport {
    /// Starts a report from the raw test labels (`truth[i]` = targets of
    /// image `i`).
    pub fn new(schema: &AttributeSchema, truth: &[Vec<f64>]) -> Result<Self> {
        let names = schema.target_names();
        let columns = columns(truth, names.len())?;
        let (ground_truth_frequencies, frequency_error) = if schema.frequency_edges.is_empty() {
            (None, None)
        } else {
            match interval_frequencies(&columns[0], &schema.frequency_edges) {
                Ok(t) => (Some(t), None),
                Err(e) => {
                    log::warn!("ground-truth frequency table skipped: {e}");
                    (None, Some(e.to_string()))
                }
            }
        };
        Ok(EvalReport {
            benchmark: schema.benchmark,
            schema_id: schema.id(),
            test_size: truth.len(),
            ground_truth_correlations: attribute_correlation_matrix(&columns, &names)?,
            target_names: names,
            ground_truth_frequencies,
            frequency_error,
            checkpoints: Vec::new(),
        })
    }

    pub fn checkpoint(&self, label: &str) -> Option<&CheckpointEval> {
        self.checkpoints.iter().find(|c| c.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("report: {e}")))
    }

    /// Writes `report.json` plus CSV and PNG companions into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        put("report.json", self.to_json())?;
        if let Some(f) = &self.ground_truth_frequencies {
            put("frequencies.csv", f.to_csv())?;
        }
        put("ground_truth_correlations.csv", self.ground_truth_correlations.to_csv())?;
        plot::heatmap(&self.ground_truth_correlations)
            .save(dir.join("ground_truth_correlations.png"))
            .map_err(|e| Error::Invalid(e.to_string()))?;
        for ck in &self.checkpoints {
            let mut scatter = String::from("ground_truth,prediction\n");
            for (g, p) in &ck.scatter {
                scatter.push_str(&format!("{g},{p}\n"));
            }
            put(&format!("scatter_{}.csv", ck.label), scatter)?;
            let mut rhos = String::from("target,rho,error\n");
            for c in &ck.correlations {
                rhos.push_str(&format!(
                    "{},{},{}\n",
                    c.target,
                    c.rho.map(|r| r.to_string()).unwrap_or_default(),
                    c.error.as_deref().unwrap_or("")
                ));
            }
            put(&format!("correlations_{}.csv", ck.label), rhos)?;
            plot::scatter(&ck.scatter)
                .save(dir.join(format!("scatter_{}.png", ck.label)))
                .map_err(|e| Error::Invalid(e.to_string()))?;
            if let Some(m) = &ck.prediction_correlations {
                put(&format!("prediction_correlations_{}.csv", ck.label), m.to_csv())?;
                plot::heatmap(m)
                    .save(dir.join(format!("prediction_correlations_{}.png", ck.label)))
                    .map_err(|e| Error::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }
}

fn columns(rows: &[Vec<f64>], width: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(r) = rows.iter().find(|r| r.len() < width) {
        return Err(Error::Shape(format!("row has {} values, need {width}", r.len())));
    }
    Ok((0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// Normalized predictions `(n, outputs)` in eval mode.
pub fn predict(net: &MultiTaskNetwork, source: &dyn SampleSource, batch_size: usize) -> Result<Array2<f64>> {
    let n = source.len();
    let mut out = Array2::zeros((n, net.output_units()));
    let batch_size = batch_size.max(1);
    for start in (0..n).step_by(batch_size) {
        let end = (start + batch_size).min(n);
        let plan: Vec<(usize, bool)> = (start..end).map(|i| (i, false)).collect();
        let batch = assemble_batch(source, &plan)?;
        let pred = net.forward(&batch.images, Mode::Eval)?;
        out.slice_mut(ndarray::s![start..end, ..]).assign(&pred);
    }
    Ok(out)
}

/// Checks that a network's outputs can be scored against `schema`.
/// Multi-task heads must match the schema exactly; a single-output head
/// is scored on the overall target only.
pub fn check_compatible(net: &MultiTaskNetwork, schema: &AttributeSchema) -> Result<()> {
    let units = net.output_units();
    if units == schema.num_targets() && net.schema_id != schema.id() {
        return Err(Error::Incompatible(format!(
            "checkpoint was trained for `{}`, schema is `{}`",
            net.schema_id,
            schema.id()
        )));
    }
    if units != 1 && units != schema.num_targets() {
        return Err(Error::Incompatible(format!(
            "checkpoint has {units} outputs, schema `{}` needs {} (or 1 for single-task)",
            schema.id(),
            schema.num_targets()
        )));
    }
    Ok(())
}

/// Scores normalized `predictions` against raw test labels.
pub fn evaluate_predictions(
    schema: &AttributeSchema,
    truth: &[Vec<f64>],
    predictions: &Array2<f64>,
    label: &str,
) -> Result<CheckpointEval> {
    let names = schema.target_names();
    let (n, units) = predictions.dim();
    if n != truth.len() {
        return Err(Error::Shape(format!("{n} predictions for {} test images", truth.len())));
    }
    if units != 1 && units != names.len() {
        return Err(Error::Incompatible(format!(
            "{units} prediction columns, schema has {} targets",
            names.len()
        )));
    }
    let gt = columns(truth, names.len())?;
    let mut correlations = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let entry = if t < units {
            let pred: Vec<f64> = predictions.column(t).to_vec();
            match spearman_rho(&gt[t], &pred) {
                Ok(r) => TargetCorrelation {
                    target: name.clone(),
                    rho: Some(r),
                    error: None,
                },
                Err(e @ Error::UndefinedCorrelation(_)) => TargetCorrelation {
                    target: name.clone(),
                    rho: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            }
        } else {
            TargetCorrelation {
                target: name.clone(),
                rho: None,
                error: Some("checkpoint mismatch: single-task checkpoint has no output for this attribute".into()),
            }
        };
        correlations.push(entry);
    }
    let overall_map = schema.target_map(0);
    let raw_pred: Vec<f64> = predictions.column(0).iter().map(|&u| overall_map.inverse(u)).collect();
    let overall_p_value = match correlations[0].rho {
        Some(r) if n >= 4 => Some(rho_significance(r, n)?),
        _ => None,
    };
    let prediction_correlations = if units == names.len() {
        let cols: Vec<Vec<f64>> = (0..units).map(|t| predictions.column(t).to_vec()).collect();
        Some(attribute_correlation_matrix(&cols, &names)?)
    } else {
        None
    };
    Ok(CheckpointEval {
        label: label.to_string(),
        output_units: units,
        prediction_min: raw_pred.iter().copied().fold(f64::INFINITY, f64::min),
        prediction_max: raw_pred.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        scatter: gt[0].iter().copied().zip(raw_pred).collect(),
        correlations,
        overall_p_value,
        prediction_correlations,
    })
}

/// Runs `net` over `source` and scores it against `truth`.
pub fn evaluate(
    net: &MultiTaskNetwork,
    source: &dyn SampleSource,
    truth: &[Vec<f64>],
    schema: &AttributeSchema,
    label: &str,
    batch_size: usize,
) -> Result<CheckpointEval> {
    check_compatible(net, schema)?;
    let predictions = predict(net, source, batch_size)?;
    evaluate_predictions(schema, truth, &predictions, label)
}

/// Overall-score rho of a network on another benchmark's test images.
/// Attribute outputs are ignored.
pub fn cross_evaluate(
    net: &MultiTaskNetwork,
    source: &dyn SampleSource,
    truth_overall: &[f64],
    batch_size: usize,
) -> Result<f64> {
    let predictions = predict(net, source, batch_size)?;
    if predictions.nrows() != truth_overall.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} test images",
            predictions.nrows(),
            truth_overall.len()
        )));
    }
    spearman_rho(truth_overall, &predictions.column(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::batch::InMemorySource;
    use crate::model::head::HeadSpec;
    use crate::model::network::tests::tiny_backbone;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eva_truth(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut row = vec![rng.random_range(2.0..9.0)];
                row.extend((0..4).map(|_| rng.random_range(1.0..4.0)));
                row
            })
            .collect()
    }

    fn images(n: usize, seed: u64) -> InMemorySource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        InMemorySource {
            images: (0..n)
                .map(|_| Array3::from_shape_simple_fn((3, 32, 32), || rng.random_range(-100.0..100.0)))
                .collect(),
            targets: vec![vec![0.5]; n],
        }
    }

    #[test]
    fn constant_predictions_surface_undefined_per_target() {
        let schema = AttributeSchema::eva();
        let truth = eva_truth(10, 1);
        let preds = Array2::from_elem((10, 5), 0.5);
        let e = evaluate_predictions(&schema, &truth, &preds, "x").unwrap();
        assert!(e.correlations.iter().all(|c| c.rho.is_none() && c.error.is_some()));
        assert_eq!(e.overall_p_value, None);
    }

    #[test]
    fn single_task_scores_overall_and_flags_attributes() {
        let schema = AttributeSchema::eva();
        let truth = eva_truth(12, 2);
        let preds = Array2::from_shape_fn((12, 1), |(i, _)| (truth[i][0] - 0.0) / 10.0);
        let e = evaluate_predictions(&schema, &truth, &preds, "x").unwrap();
        assert!((e.overall_rho().unwrap() - 1.0).abs() < 1e-12);
        for c in &e.correlations[1..] {
            assert!(c.error.as_ref().unwrap().contains("mismatch"));
        }
        assert_eq!(e.scatter.len(), 12);
        assert!((e.prediction_max - truth.iter().map(|r| r[0]).fold(0.0, f64::max)).abs() < 1e-9);
    }

    #[test]
    fn report_round_trip_and_files() {
        let schema = AttributeSchema::eva();
        let truth = eva_truth(20, 3);
        let mut report = EvalReport::new(&schema, &truth).unwrap();
        assert_eq!(report.ground_truth_frequencies.as_ref().unwrap().total(), 20);
        let preds = Array2::from_shape_fn((20, 5), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        report.checkpoints.push(evaluate_predictions(&schema, &truth, &preds, TRAINING_LABEL).unwrap());
        let back = EvalReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        let dir = tempfile::tempdir().unwrap();
        report.write(dir.path()).unwrap();
        for f in ["report.json", "frequencies.csv", "scatter_training.csv", "scatter_training.png"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn cross_eval_on_own_split_matches_report() {
        let schema = AttributeSchema::eva();
        let net = MultiTaskNetwork::build(tiny_backbone(4), HeadSpec::new(5, 0.25), 5, schema.id()).unwrap();
        let src = images(8, 6);
        let truth = eva_truth(8, 7);
        let full = evaluate(&net, &src, &truth, &schema, "x", 3).unwrap();
        let overall: Vec<f64> = truth.iter().map(|r| r[0]).collect();
        let cross = cross_evaluate(&net, &src, &overall, 5).unwrap();
        assert_eq!(Some(cross), full.overall_rho());
    }

    #[test]
    fn incompatible_checkpoint_named() {
        let net = MultiTaskNetwork::build(tiny_backbone(4), HeadSpec::new(5, 0.25), 5, "other").unwrap();
        let err = check_compatible(&net, &AttributeSchema::eva()).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
        assert!(check_compatible(&net, &AttributeSchema::aadb()).is_err());
    }
}
