//! Rank-correlation metrics and test-split reports.

pub mod baseline;
pub mod correlation;
pub mod frequency;
pub mod human;
pub mod report;
pub mod significance;
pub mod spearman;

pub use correlation::{attribute_correlation_matrix, CorrelationMatrix};
pub use frequency::{interval_frequencies, FrequencyTable};
pub use human::{human_consistency_table, HumanBand, HumanComparison, Ranking};
pub use report::{
    cross_evaluate, evaluate, evaluate_predictions, predict, CheckpointEval, EvalReport, TargetCorrelation,
    FINE_TUNING_LABEL, TRAINING_LABEL,
};
pub use significance::{permutation_p_value, rho_significance};
pub use spearman::{average_ranks, spearman_rho};
