//! Loss, optimizer, learning-rate schedules and the two-stage procedure.

pub mod adam;
pub mod loss;
pub mod pipeline;
pub mod schedule;
pub mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::{mse_loss, mse_loss_and_grad};
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use schedule::LrSchedule;
pub use trainer::{lr_schedule, train_stage, StageConfig, StageId, TrainState, FINE_TUNE_LAYERS};
