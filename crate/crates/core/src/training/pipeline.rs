use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::dataset::batch::{RecordSource, SampleSource};
use crate::dataset::records::{ImageRecord, Split};
use crate::dataset::{load_labels, split_dataset, Partition};
use crate::error::{Error, Result};
use crate::evaluation::report::{evaluate, EvalReport, FINE_TUNING_LABEL, TRAINING_LABEL};
use crate::model::backbone::{Backbone, BackboneSpec};
use crate::model::head::HeadSpec;
use crate::model::network::MultiTaskNetwork;
use crate::schema::AttributeSchema;
use crate::training::trainer::{train_stage, TrainState};

pub const STAGE1_CHECKPOINT: &str = "stage1.safetensors";
pub const STAGE2_CHECKPOINT: &str = "stage2.safetensors";
pub const TRAINING_LOG: &str = "training_log.csv";

#[derive(Debug)]
pub struct PipelineOutcome {
    pub network: MultiTaskNetwork,
    pub state: TrainState,
    pub report: EvalReport,
    pub checkpoints: [PathBuf; 2],
}

/// Labels and their split for a config.
pub fn load_partition(cfg: &PipelineConfig, schema: &AttributeSchema) -> Result<Partition> {
    let (records, _) = load_labels(schema, cfg.manifest.as_deref(), cfg.votes.as_deref())?;
    split_dataset(records, schema, cfg.split_seed)
}

pub fn record_source(cfg: &PipelineConfig, records: &[ImageRecord], outputs: usize) -> Result<RecordSource> {
    RecordSource::new(records, &cfg.image_root, cfg.input_size, outputs)
}

pub fn raw_targets(records: &[ImageRecord]) -> Vec<Vec<f64>> {
    records.iter().map(|r| r.raw_targets.clone()).collect()
}

/// Builds the untrained network: pretrained backbone plus a fresh head.
pub fn initial_network(cfg: &PipelineConfig, schema: &AttributeSchema) -> Result<MultiTaskNetwork> {
    let backbone = Backbone::load(BackboneSpec::vgg16(cfg.input_size), &cfg.backbone_weights)?;
    let head = HeadSpec::new(cfg.output_units(schema), cfg.dropout_rate());
    MultiTaskNetwork::build(backbone, head, cfg.seed, schema.id())
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Stage 1, checkpoint, evaluate; stage 2, checkpoint, evaluate. Writes
/// checkpoints, the training log and the report under `output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let schema = cfg.schema()?;
    let partition = load_partition(cfg, &schema)?;
    let mut net = initial_network(cfg, &schema)?;
    let units = net.output_units();
    let train = record_source(cfg, partition.get(Split::Train), units)?;
    let val = record_source(cfg, partition.get(Split::Val), units)?;
    let test_records = partition.get(Split::Test);
    let test = record_source(cfg, test_records, units)?;
    let truth = raw_targets(test_records);
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("config.toml"), cfg.to_toml())?;

    let weights = cfg.loss_weights.as_deref();
    let val_ref = if val.is_empty() { None } else { Some(&val as &dyn SampleSource) };
    let mut state = TrainState::new(cfg.seed);
    let mut report = EvalReport::new(&schema, &truth)?;
    let checkpoints = [out.join(STAGE1_CHECKPOINT), out.join(STAGE2_CHECKPOINT)];
    let stages = [
        (cfg.stage1(), TRAINING_LABEL, &checkpoints[0]),
        (cfg.stage2()?, FINE_TUNING_LABEL, &checkpoints[1]),
    ];
    for (stage, label, path) in stages {
        log::info!("{}: {} epochs on {} images", stage.stage, stage.epochs, train.len());
        train_stage(&mut net, &train, val_ref, &stage, &mut state, weights)?;
        net.save(path)?;
        write(&out.join(TRAINING_LOG), state.to_csv())?;
        if !test_records.is_empty() {
            let eval = evaluate(&net, &test, &truth, &schema, label, cfg.eval_batch_size)?;
            log::info!(
                "{label}: test overall rho {}",
                eval.overall_rho().map_or("undefined".into(), |r| format!("{r:.4}"))
            );
            report.checkpoints.push(eval);
        }
    }
    write(
        &out.join("train_state.json"),
        serde_json::to_string_pretty(&state).expect("state serializes"),
    )?;
    report.write(&out.join("report"))?;
    Ok(PipelineOutcome {
        network: net,
        state,
        report,
        checkpoints,
    })
}
