use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtaesthetics::{Benchmark, ErrorClass};

mod commands;

#[derive(Parser)]
#[command(name = "mtaesthetics", version, about = "Multi-task image aesthetics: prepare, train, evaluate, explain")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct GlobalOpts {
    /// Pipeline config file (flat TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the training seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fixed-order reductions and recorded run settings
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Predict the overall score only
    #[arg(long, global = true)]
    pub single_task: bool,
    /// Overrides the dataset named in the config
    #[arg(long, global = true, value_parser = parse_benchmark)]
    pub dataset: Option<Benchmark>,
    /// Directory that relative data paths resolve against
    #[arg(long, global = true, env = "MTAESTHETICS_DATA_ROOT", hide_env_values = true)]
    pub data_root: Option<PathBuf>,
}

fn parse_benchmark(s: &str) -> Result<Benchmark, String> {
    s.parse().map_err(|e: mtaesthetics::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Split labels, average votes and write dataset statistics
    Prepare {
        /// Output directory (default: <output_dir>/prepared)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-stage training with checkpoints, log and report
    Train,
    /// Score a checkpoint on the test split
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Name of the checkpoint in the report
        #[arg(long, default_value = "fine-tuning")]
        label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overall-score rho of each checkpoint on each benchmark's test split
    CrossEval {
        #[arg(long)]
        aadb_config: PathBuf,
        #[arg(long)]
        eva_config: PathBuf,
        #[arg(long)]
        aadb_checkpoint: Option<PathBuf>,
        #[arg(long)]
        eva_checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grad-CAM overlays for the given images
    Gradcam {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        image: Vec<PathBuf>,
        /// 0 is the overall score, 1.. the attributes
        #[arg(long, default_value_t = 0)]
        output_index: usize,
        #[arg(long, default_value = mtaesthetics::explain::DEFAULT_LAYER)]
        layer: String,
        #[arg(long, default_value_t = 0.5)]
        opacity: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a report next to the published reference numbers
    Report {
        /// report.json written by `train` or `evaluate`
        #[arg(long)]
        report: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err
        .chain()
        .find_map(|e| e.downcast_ref::<mtaesthetics::Error>())
        .map(mtaesthetics::Error::class);
    match class {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Data) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Prepare { out } => commands::prepare(g, out),
        Command::Train => commands::train(g),
        Command::Evaluate { checkpoint, label, out } => commands::evaluate(g, &checkpoint, &label, out),
        Command::CrossEval {
            aadb_config,
            eva_config,
            aadb_checkpoint,
            eva_checkpoint,
            out,
        } => commands::cross_eval(g, &aadb_config, &eva_config, aadb_checkpoint, eva_checkpoint, out),
        Command::Gradcam {
            checkpoint,
            image,
            output_index,
            layer,
            opacity,
            out,
        } => commands::gradcam(g, &checkpoint, &image, output_index, &layer, opacity, out),
        Command::Report { report } => commands::report(&report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
