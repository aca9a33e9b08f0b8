//! Flat TOML pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::image::DEFAULT_INPUT_SIZE;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Benchmark};
use crate::training::schedule::LrSchedule;
use crate::training::trainer::StageConfig;

/// Environment variable naming the directory that relative data paths
/// resolve against.
pub const DATA_ROOT_ENV: &str = "MTAESTHETICS_DATA_ROOT";

pub const DEFAULT_SEED: u64 = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Benchmark,
    /// Schema file; required for `custom`, optional override otherwise.
    pub schema: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub votes: Option<PathBuf>,
    pub image_root: PathBuf,
    pub backbone_weights: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub split_seed: u64,
    pub input_size: usize,
    /// Defaults to 0.35 for AADB and 0.25 otherwise.
    pub dropout: Option<f64>,
    /// 1 or K + 1; defaults to K + 1.
    pub output_units: Option<usize>,
    pub single_task: bool,
    pub deterministic: bool,
    pub eval_batch_size: usize,
    pub augment: bool,
    /// Per-target loss weights; all ones when absent.
    pub loss_weights: Option<Vec<f64>>,
    pub stage1_epochs: Option<usize>,
    pub stage1_batch_size: Option<usize>,
    pub stage1_learning_rate: Option<f64>,
    pub stage2_epochs: Option<usize>,
    pub stage2_batch_size: Option<usize>,
    pub stage2_learning_rate: Option<f64>,
    pub stage2_decay_steps: Option<u64>,
    pub stage2_decay_base: Option<f64>,
    /// `staircase` (default) or `exponential`.
    pub stage2_schedule: Option<String>,
    /// Backbone layers released in stage 2.
    pub stage2_unfreeze: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: Benchmark::Aadb,
            schema: None,
            manifest: None,
            votes: None,
            image_root: PathBuf::from("images"),
            backbone_weights: PathBuf::from("vgg16_notop.safetensors"),
            output_dir: PathBuf::from("runs"),
            seed: DEFAULT_SEED,
            split_seed: DEFAULT_SEED,
            input_size: DEFAULT_INPUT_SIZE,
            dropout: None,
            output_units: None,
            single_task: false,
            deterministic: false,
            eval_batch_size: 32,
            augment: true,
            loss_weights: None,
            stage1_epochs: None,
            stage1_batch_size: None,
            stage1_learning_rate: None,
            stage2_epochs: None,
            stage2_batch_size: None,
            stage2_learning_rate: None,
            stage2_decay_steps: None,
            stage2_decay_base: None,
            stage2_schedule: None,
            stage2_unfreeze: None,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative data paths resolve against
    /// `$MTAESTHETICS_DATA_ROOT` when set, else the file's directory;
    /// `output_dir` always resolves against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let data_root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| dir.clone());
        cfg.resolve_paths(&data_root, &dir);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, data_root: &Path, config_dir: &Path) {
        let join = |base: &Path, p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.schema, &mut self.manifest, &mut self.votes].into_iter().flatten() {
            join(data_root, p);
        }
        join(data_root, &mut self.image_root);
        join(data_root, &mut self.backbone_weights);
        join(config_dir, &mut self.output_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn schema(&self) -> Result<AttributeSchema> {
        match (&self.schema, AttributeSchema::builtin(self.dataset)) {
            (Some(path), _) => {
                let s = AttributeSchema::from_file(path)?;
                if s.benchmark != self.dataset {
                    return Err(Error::Config(format!(
                        "schema {} is for {}, config says {}",
                        path.display(),
                        s.benchmark,
                        self.dataset
                    )));
                }
                Ok(s)
            }
            (None, Some(s)) => Ok(s),
            (None, None) => Err(Error::Config("a custom dataset needs a `schema` file".into())),
        }
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.unwrap_or(match self.dataset {
            Benchmark::Aadb => 0.35,
            _ => 0.25,
        })
    }

    pub fn output_units(&self, schema: &AttributeSchema) -> usize {
        if self.single_task {
            1
        } else {
            self.output_units.unwrap_or(schema.num_targets())
        }
    }

    pub fn stage1(&self) -> StageConfig {
        let mut s = StageConfig::stage1();
        s.epochs = self.stage1_epochs.unwrap_or(s.epochs);
        s.batch_size = self.stage1_batch_size.unwrap_or(s.batch_size);
        s.learning_rate = self.stage1_learning_rate.unwrap_or(s.learning_rate);
        s.augment = self.augment;
        s
    }

    pub fn stage2(&self) -> Result<StageConfig> {
        let mut s = StageConfig::stage2();
        s.epochs = self.stage2_epochs.unwrap_or(s.epochs);
        s.batch_size = self.stage2_batch_size.unwrap_or(s.batch_size);
        s.learning_rate = self.stage2_learning_rate.unwrap_or(s.learning_rate);
        s.augment = self.augment;
        let decay_steps = self.stage2_decay_steps.unwrap_or(125);
        let base = self.stage2_decay_base.unwrap_or(0.5);
        s.schedule = match self.stage2_schedule.as_deref().unwrap_or("staircase") {
            "staircase" => LrSchedule::Staircase { decay_steps, base },
            "exponential" => LrSchedule::Exponential { decay_steps, base },
            "constant" => LrSchedule::Constant,
            other => return Err(Error::Config(format!("unknown stage2_schedule `{other}`"))),
        };
        if let Some(layers) = &self.stage2_unfreeze {
            s.trainable = crate::model::head::HEAD_LAYERS
                .iter()
                .map(|n| n.to_string())
                .chain(layers.iter().cloned())
                .collect();
        }
        Ok(s)
    }

    /// Checks values and that referenced label files and directories exist.
    /// Backbone weights are checked when loaded.
    pub fn validate(&self) -> Result<()> {
        let schema = self.schema()?;
        let dropout = self.dropout_rate();
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let units = self.output_units(&schema);
        if units != 1 && units != schema.num_targets() {
            return Err(Error::Config(format!(
                "output_units must be 1 or {}, got {units}",
                schema.num_targets()
            )));
        }
        if let Some(w) = &self.loss_weights {
            if w.len() != units || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Config(format!(
                    "loss_weights needs {units} non-negative values"
                )));
            }
        }
        if self.eval_batch_size == 0 {
            return Err(Error::Config("eval_batch_size must be positive".into()));
        }
        self.stage1().validate()?;
        self.stage2()?.validate()?;
        let labels = match schema.benchmark {
            Benchmark::Eva => self.votes.as_ref().map(|p| ("votes", p)),
            _ => self
                .manifest
                .as_ref()
                .map(|p| ("manifest", p))
                .or(self.votes.as_ref().map(|p| ("votes", p))),
        };
        match labels {
            Some((key, p)) if !p.is_file() => {
                return Err(Error::Config(format!("{key} file {} does not exist", p.display())))
            }
            None => {
                return Err(Error::Config(match schema.benchmark {
                    Benchmark::Eva => "eva needs a `votes` file".into(),
                    _ => "a `manifest` file is required".into(),
                }))
            }
            _ => {}
        }
        if !self.image_root.is_dir() {
            return Err(Error::Config(format!(
                "image_root {} is not a directory",
                self.image_root.display()
            )));
        }
        Ok(())
    }
}
