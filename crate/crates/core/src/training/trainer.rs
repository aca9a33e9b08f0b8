use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::batch::{assemble_batch, epoch_plan, SampleSource};
use crate::error::{Error, Result};
use crate::evaluation::report::predict;
use crate::evaluation::spearman::spearman_rho;
use crate::model::head::HEAD_LAYERS;
use crate::model::network::MultiTaskNetwork;
use crate::training::adam::{Adam, AdamConfig};
use crate::training::loss::{mse_loss, mse_loss_and_grad};
use crate::training::schedule::LrSchedule;

/// Backbone layers released in the fine-tuning stage.
pub const FINE_TUNE_LAYERS: [&str; 2] = ["block4_conv2", "block4_conv3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageId {
    Stage1,
    Stage2,
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageId::Stage1 => "stage1",
            StageId::Stage2 => "stage2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: StageId,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Layers updated in this stage; every other layer is frozen.
    pub trainable: Vec<String>,
    /// Steps count from zero at the start of the stage.
    pub schedule: LrSchedule,
    /// Random horizontal flips of training images.
    pub augment: bool,
}

impl StageConfig {
    /// Head only, constant rate.
    pub fn stage1() -> Self {
        StageConfig {
            stage: StageId::Stage1,
            learning_rate: 1e-3,
            adam: AdamConfig::default(),
            epochs: 5,
            batch_size: 64,
            trainable: HEAD_LAYERS.iter().map(|s| s.to_string()).collect(),
            schedule: LrSchedule::Constant,
            augment: true,
        }
    }

    /// Head plus the last two block-4 convolutions, rate halved every 125
    /// steps.
    pub fn stage2() -> Self {
        StageConfig {
            stage: StageId::Stage2,
            learning_rate: 1e-4,
            adam: AdamConfig::default(),
            epochs: 3,
            batch_size: 64,
            trainable: HEAD_LAYERS
                .iter()
                .chain(FINE_TUNE_LAYERS.iter())
                .map(|s| s.to_string())
                .collect(),
            schedule: LrSchedule::Staircase {
                decay_steps: 125,
                base: 0.5,
            },
            augment: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(format!("{}: epochs and batch size must be positive", self.stage)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("{}: learning rate must be positive", self.stage)));
        }
        Ok(())
    }
}

/// Learning rate of `stage` at its `step`-th update.
pub fn lr_schedule(stage: &StageConfig, step: u64) -> f64 {
    stage.schedule.rate(stage.learning_rate, step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub stage: StageId,
    pub lr: f64,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub stage: StageId,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_rho: Option<f64>,
}

/// Counters and append-only histories carried across stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub global_step: u64,
    pub epoch: u64,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(seed: u64) -> Self {
        TrainState {
            global_step: 0,
            epoch: 0,
            seed,
            steps: Vec::new(),
            epochs: Vec::new(),
        }
    }

    /// `step,epoch,stage,lr,train_loss,val_loss,val_rho`; the validation
    /// columns are filled on the last step of each epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,epoch,stage,lr,train_loss,val_loss,val_rho\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, s) in self.steps.iter().enumerate() {
            let last_of_epoch = self.steps.get(i + 1).is_none_or(|n| n.epoch != s.epoch);
            let (vl, vr) = match self.epochs.iter().find(|e| e.epoch == s.epoch) {
                Some(e) if last_of_epoch => (opt(e.val_loss), opt(e.val_rho)),
                _ => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{vl},{vr}\n",
                s.step, s.epoch, s.stage, s.lr, s.train_loss
            ));
        }
        out
    }
}

/// Dropout seed for one global step.
fn step_seed(seed: u64, step: u64) -> u64 {
    let mut z = seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stacked_targets(source: &dyn SampleSource) -> Array2<f64> {
    let k = source.targets(0).len();
    Array2::from_shape_fn((source.len(), k), |(i, j)| source.targets(i)[j])
}

/// Mean squared error and overall-score rho on a held-out source.
pub fn validation_metrics(
    net: &MultiTaskNetwork,
    source: &dyn SampleSource,
    batch_size: usize,
) -> Result<(f64, Option<f64>)> {
    let pred = predict(net, source, batch_size)?;
    let target = stacked_targets(source);
    let loss = mse_loss(&pred, &target)?;
    let rho = spearman_rho(&target.column(0).to_vec(), &pred.column(0).to_vec()).ok();
    Ok((loss, rho))
}

/// Runs one training stage in place. The stage's trainability mask is
/// applied before the first update.
pub fn train_stage(
    net: &mut MultiTaskNetwork,
    train: &dyn SampleSource,
    val: Option<&dyn SampleSource>,
    stage: &StageConfig,
    state: &mut TrainState,
    loss_weights: Option<&[f64]>,
) -> Result<()> {
    stage.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    if train.targets(0).len() != net.output_units() {
        return Err(Error::Shape(format!(
            "training targets have {} values, network has {} outputs",
            train.targets(0).len(),
            net.output_units()
        )));
    }
    net.set_trainable(&stage.trainable, true)?;
    net.set_trainable(&net.layer_names(), false)?;
    net.set_trainable(&stage.trainable, true)?;

    let mut adam = Adam::new(stage.adam);
    let mut stage_step = 0u64;
    for _ in 0..stage.epochs {
        let epoch = state.epoch;
        let plan = epoch_plan(train.len(), state.seed, epoch, stage.augment);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in plan.chunks(stage.batch_size) {
            let batch = assemble_batch(train, chunk)?;
            let lr = lr_schedule(stage, stage_step);
            let step = state.global_step;
            let out = net.compute_gradients(&batch.images, step_seed(state.seed, step), |p| {
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteLoss { step });
                }
                mse_loss_and_grad(p, &batch.targets, loss_weights)
            })?;
            if !out.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: state.global_step,
                });
            }
            adam.step(net, &out.gradients, lr)?;
            log::debug!("{} step {} lr {lr:.3e} loss {:.6}", stage.stage, state.global_step, out.loss);
            state.steps.push(StepRecord {
                step: state.global_step,
                epoch,
                stage: stage.stage,
                lr,
                train_loss: out.loss,
            });
            loss_sum += out.loss;
            batches += 1;
            state.global_step += 1;
            stage_step += 1;
        }
        let (val_loss, val_rho) = match val {
            Some(v) if !v.is_empty() => {
                let (l, r) = validation_metrics(net, v, stage.batch_size)?;
                (Some(l), r)
            }
            _ => (None, None),
        };
        let train_loss = loss_sum / batches as f64;
        log::info!(
            "{} epoch {epoch}: train loss {train_loss:.6}, val loss {}, val rho {}",
            stage.stage,
            val_loss.map_or("-".into(), |v| format!("{v:.6}")),
            val_rho.map_or("-".into(), |v| format!("{v:.4}")),
        );
        state.epochs.push(EpochRecord {
            epoch,
            stage: stage.stage,
            train_loss,
            val_loss,
            val_rho,
        });
        state.epoch += 1;
    }
    Ok(())
}
