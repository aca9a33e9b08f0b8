//! Published reference numbers bundled as data for side-by-side reports.
//! Nothing here is asserted at runtime.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::evaluation::human::HumanBand;
use crate::evaluation::report::EvalReport;
use crate::schema::Benchmark;

const BUNDLED: &str = include_str!("../../data/reference.json");

#[derive(Debug, Clone, Deserialize)]
pub struct MethodRho {
    pub method: String,
    pub rho: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ParameterCounts {
    pub backbone: usize,
    pub hidden_layers: usize,
    pub output_layer_aadb: usize,
    pub output_layer_eva: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceFrequencies {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SingleVsMulti {
    pub single_task: f64,
    pub multi_task: f64,
}

type ByCheckpoint = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, Deserialize)]
pub struct Reference {
    pub aadb_overall_methods: Vec<MethodRho>,
    pub parameter_counts: ParameterCounts,
    pub aadb_test_frequencies: ReferenceFrequencies,
    pub human_consistency: Vec<HumanBand>,
    /// checkpoint label -> target -> rho
    pub aadb_attributes: ByCheckpoint,
    pub aadb_single_vs_multi: SingleVsMulti,
    pub eva_vote_average_ranges: BTreeMap<String, (f64, f64)>,
    /// `multi_task` / `single_task` -> checkpoint label -> overall rho
    pub eva_overall: ByCheckpoint,
    pub eva_test_frequencies: ReferenceFrequencies,
    pub eva_attributes: ByCheckpoint,
    /// train benchmark -> test benchmark -> overall rho
    pub cross_dataset: ByCheckpoint,
    pub aadb_ground_truth_overall_content: f64,
}

impl Reference {
    pub fn bundled() -> &'static Reference {
        static CELL: OnceLock<Reference> = OnceLock::new();
        CELL.get_or_init(|| serde_json::from_str(BUNDLED).expect("bundled reference file is valid"))
    }

    /// Published per-target rho for a checkpoint label, if any.
    pub fn target_rho(&self, benchmark: Benchmark, checkpoint: &str, target: &str) -> Option<f64> {
        match benchmark {
            Benchmark::Aadb => self.aadb_attributes.get(checkpoint)?.get(target).copied(),
            Benchmark::Eva => {
                if target == "overall" {
                    self.eva_overall.get("multi_task")?.get(checkpoint).copied()
                } else {
                    self.eva_attributes.get(checkpoint)?.get(target).copied()
                }
            }
            Benchmark::Custom => None,
        }
    }

    pub fn cross_rho(&self, train: Benchmark, test: Benchmark) -> Option<f64> {
        self.cross_dataset.get(train.as_str())?.get(test.as_str()).copied()
    }
}

/// Plain-text table of measured against published correlations.
pub fn render_comparison(report: &EvalReport, reference: &Reference) -> String {
    let labels: Vec<&str> = report.checkpoints.iter().map(|c| c.label.as_str()).collect();
    let mut out = format!("{:<24}", "target");
    for l in &labels {
        out.push_str(&format!(" {:>14} {:>10}", l, "published"));
    }
    out.push('\n');
    for (t, target) in report.target_names.iter().enumerate() {
        out.push_str(&format!("{target:<24}"));
        for ck in &report.checkpoints {
            let measured = ck
                .correlations
                .get(t)
                .and_then(|c| c.rho)
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
            let published = reference
                .target_rho(report.benchmark, &ck.label, target)
                .map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
            out.push_str(&format!(" {measured:>14} {published:>10}"));
        }
        out.push('\n');
    }
    out
}
