use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mtaesthetics::config::PipelineConfig;
use mtaesthetics::dataset::{self, dataset_statistics, write_manifest, Split};
use mtaesthetics::evaluation::baseline::{render_comparison, Reference};
use mtaesthetics::evaluation::human::{human_consistency_table, render_human_table};
use mtaesthetics::evaluation::report::{check_compatible, cross_evaluate, evaluate as score_checkpoint, EvalReport, FINE_TUNING_LABEL};
use mtaesthetics::explain::{grad_cam, overlay};
use mtaesthetics::model::MultiTaskNetwork;
use mtaesthetics::training::pipeline::{load_partition, raw_targets, record_source};
use mtaesthetics::training::run_pipeline;
use mtaesthetics::{Benchmark, Error};

use crate::GlobalOpts;

/// Loads the config and applies command-line overrides.
fn load_config(g: &GlobalOpts, path: Option<&Path>) -> Result<PipelineConfig> {
    let path = path
        .or(g.config.as_deref())
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = PipelineConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let data_root = g.data_root.clone().unwrap_or_else(|| config_dir.clone());
    cfg.resolve_paths(&data_root, &config_dir);
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(d) = g.dataset {
        cfg.dataset = d;
    }
    cfg.single_task |= g.single_task;
    cfg.deterministic |= g.deterministic;
    if cfg.deterministic {
        log::info!("deterministic mode: single-threaded, fixed-order reductions");
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn prepare(g: &GlobalOpts, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(g, None)?;
    let schema = cfg.schema()?;
    let (records, averages) = dataset::load_labels(&schema, cfg.manifest.as_deref(), cfg.votes.as_deref())?;
    let partition = dataset::split_dataset(records, &schema, cfg.split_seed)?;
    let out = out.unwrap_or_else(|| cfg.output_dir.join("prepared"));
    create_dir(&out)?;
    for split in Split::ALL {
        write_manifest(&out.join(format!("{split}.csv")), partition.get(split), &schema)?;
    }
    if let Some(avg) = &averages {
        dataset::votes::write_averages(&out.join("vote_averages.csv"), avg, &schema)?;
    }
    let stats = dataset_statistics(&partition, &schema)?;
    write(&out.join("statistics.json"), &stats.to_json())?;
    let [tr, va, te] = partition.sizes();
    println!("prepared {} images (train {tr}, val {va}, test {te}) in {}", stats.images, out.display());
    Ok(())
}

pub fn train(g: &GlobalOpts) -> Result<()> {
    let cfg = load_config(g, None)?;
    let outcome = run_pipeline(&cfg)?;
    for ck in &outcome.report.checkpoints {
        println!(
            "{}: test overall rho {}",
            ck.label,
            ck.overall_rho().map_or("undefined".into(), |r| format!("{r:.4}"))
        );
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<MultiTaskNetwork> {
    MultiTaskNetwork::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn evaluate(g: &GlobalOpts, checkpoint: &Path, label: &str, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(g, None)?;
    let schema = cfg.schema()?;
    let net = load_checkpoint(checkpoint)?;
    check_compatible(&net, &schema)?;
    cfg.input_size = net.backbone.spec.input_size;
    let partition = load_partition(&cfg, &schema)?;
    let test_records = partition.get(Split::Test);
    let truth = raw_targets(test_records);
    let source = record_source(&cfg, test_records, 1)?;
    let mut report = EvalReport::new(&schema, &truth)?;
    let eval = score_checkpoint(&net, &source, &truth, &schema, label, cfg.eval_batch_size)?;
    for c in &eval.correlations {
        match (c.rho, &c.error) {
            (Some(r), _) => println!("{:<24} {r:.4}", c.target),
            (None, Some(e)) => println!("{:<24} n/a ({e})", c.target),
            _ => {}
        }
    }
    report.checkpoints.push(eval);
    let out = out.unwrap_or_else(|| cfg.output_dir.join("evaluation"));
    report.write(&out)?;
    println!("report written to {}", out.display());
    Ok(())
}

pub fn cross_eval(
    g: &GlobalOpts,
    aadb_config: &Path,
    eva_config: &Path,
    aadb_checkpoint: Option<PathBuf>,
    eva_checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut configs = BTreeMap::new();
    for (bench, path) in [(Benchmark::Aadb, aadb_config), (Benchmark::Eva, eva_config)] {
        let mut cfg = load_config(g, Some(path))?;
        cfg.dataset = bench;
        configs.insert(bench, cfg);
    }
    let checkpoints: Vec<(Benchmark, PathBuf)> = [(Benchmark::Aadb, aadb_checkpoint), (Benchmark::Eva, eva_checkpoint)]
        .into_iter()
        .filter_map(|(b, p)| p.map(|p| (b, p)))
        .collect();
    if checkpoints.is_empty() {
        return Err(Error::Config("give --aadb-checkpoint and/or --eva-checkpoint".into()).into());
    }
    // train benchmark -> test benchmark -> rho
    let mut table: BTreeMap<String, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for (train_bench, ck) in &checkpoints {
        let net = load_checkpoint(ck)?;
        for (test_bench, cfg) in &configs {
            let schema = cfg.schema()?;
            let mut cfg = cfg.clone();
            cfg.input_size = net.backbone.spec.input_size;
            let partition = load_partition(&cfg, &schema)?;
            let test_records = partition.get(Split::Test);
            let overall: Vec<f64> = test_records.iter().map(|r| r.raw_targets[0]).collect();
            let source = record_source(&cfg, test_records, 1)?;
            let rho = match cross_evaluate(&net, &source, &overall, cfg.eval_batch_size) {
                Ok(r) => Some(r),
                Err(e @ Error::UndefinedCorrelation(_)) => {
                    log::warn!("{train_bench} -> {test_bench}: {e}");
                    None
                }
                Err(e) => return Err(e.into()),
            };
            table
                .entry(train_bench.to_string())
                .or_default()
                .insert(test_bench.to_string(), rho);
        }
    }
    let reference = Reference::bundled();
    let mut text = format!("{:<8} {:>10} {:>10}   (published: aadb / eva)\n", "train", "aadb", "eva");
    let mut csv = String::from("train,test_aadb,test_eva\n");
    for (train, row) in &table {
        let cell = |k: &str| row.get(k).copied().flatten();
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        let bench: Benchmark = train.parse()?;
        let published = |t| reference.cross_rho(bench, t).map_or("-".into(), |r| format!("{r:.3}"));
        text.push_str(&format!(
            "{train:<8} {:>10} {:>10}   ({} / {})\n",
            fmt(cell("aadb")),
            fmt(cell("eva")),
            published(Benchmark::Aadb),
            published(Benchmark::Eva)
        ));
        let raw = |v: Option<f64>| v.map(|r| r.to_string()).unwrap_or_default();
        csv.push_str(&format!("{train},{},{}\n", raw(cell("aadb")), raw(cell("eva"))));
    }
    print!("{text}");
    let out = out.unwrap_or_else(|| configs[&Benchmark::Aadb].output_dir.join("cross_eval"));
    create_dir(&out)?;
    write(&out.join("cross_eval.csv"), &csv)?;
    write(&out.join("cross_eval.json"), &serde_json::to_string_pretty(&table)?)?;
    Ok(())
}

pub fn gradcam(
    g: &GlobalOpts,
    checkpoint: &Path,
    images: &[PathBuf],
    output_index: usize,
    layer: &str,
    opacity: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(g, None)?;
    let net = load_checkpoint(checkpoint)?;
    let size = net.backbone.spec.input_size;
    let out = out.unwrap_or_else(|| cfg.output_dir.join("gradcam"));
    create_dir(&out)?;
    for path in images {
        let path = if path.is_relative() && !path.exists() {
            cfg.image_root.join(path)
        } else {
            path.clone()
        };
        let encoded = dataset::encode_image(&path, size)?;
        let batch = encoded.insert_axis(ndarray::Axis(0));
        let map = grad_cam(&net, &batch, output_index, layer)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let target = out.join(format!("{stem}_out{output_index}_{layer}.png"));
        overlay(&map, &path, opacity, &target)?;
        println!("{}", target.display());
    }
    Ok(())
}

pub fn report(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report = EvalReport::from_json(&text)?;
    let reference = Reference::bundled();
    println!("{} test split, {} images", report.benchmark, report.test_size);
    print!("{}", render_comparison(&report, reference));
    for ck in &report.checkpoints {
        if let Some(p) = ck.overall_p_value {
            println!("{}: overall p-value {p:.3e}", ck.label);
        }
        println!(
            "{}: prediction range [{:.3}, {:.3}]",
            ck.label, ck.prediction_min, ck.prediction_max
        );
    }
    if report.benchmark == Benchmark::Aadb {
        let ck = report
            .checkpoint(FINE_TUNING_LABEL)
            .or(report.checkpoints.last())
            .and_then(|c| c.overall_rho());
        if let Some(rho) = ck {
            println!("\nagreement with individual raters:");
            print!("{}", render_human_table(&human_consistency_table(rho, &reference.human_consistency)));
        }
    }
    if let Some(f) = &report.ground_truth_frequencies {
        println!("\nground-truth overall score frequencies:");
        print!("{}", f.to_csv());
    }
    Ok(())
}
