//! Acceptance gate. Run with
//! `cargo test -p mtaesthetics --test acceptance -- --nocapture`
//! to see one PASS / FAIL / SKIP line per criterion.
//!
//! Criteria 8-10 need the real datasets: point `MTAESTHETICS_AADB_CONFIG`
//! and `MTAESTHETICS_EVA_CONFIG` at pipeline config files. Criteria 9 and
//! 10 also train full networks and run only with `MTAESTHETICS_FULL_REPRO=1`.

use std::collections::BTreeMap;
use std::path::Path;

use mtaesthetics::config::PipelineConfig;
use mtaesthetics::dataset::records::Split;
use mtaesthetics::dataset::{average_votes, load_votes, InMemorySource};
use mtaesthetics::evaluation::baseline::Reference;
use mtaesthetics::evaluation::report::{cross_evaluate, FINE_TUNING_LABEL};
use mtaesthetics::evaluation::{attribute_correlation_matrix, interval_frequencies, spearman_rho};
use mtaesthetics::explain::grad_cam;
use mtaesthetics::model::head::{sigmoid, Head, HeadSpec};
use mtaesthetics::model::{Backbone, BackboneSpec, MultiTaskNetwork, Part};
use mtaesthetics::training::pipeline::{load_partition, record_source};
use mtaesthetics::training::{lr_schedule, mse_loss, run_pipeline, train_stage, StageConfig, TrainState};
use mtaesthetics::{AttributeSchema, Benchmark, Error};
use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SPEARMAN_TOL: f64 = 1e-12;
const GRAD_REL_TOL: f64 = 1e-4;
/// Floor on the finite-difference denominator, so gradients that are
/// numerically zero compare on an absolute scale.
const GRAD_DENOM_FLOOR: f64 = 1e-6;
const OVERFIT_MSE: f64 = 1e-3;
const EVA_RANGE_TOL: f64 = 1e-3;
const CONTENT_RHO_TOL: f64 = 0.02;
const AADB_MIN_RHO: f64 = 0.68;
const EVA_MIN_RHO: f64 = 0.66;
const ATTRIBUTE_RHO_TOL: f64 = 0.05;
const CROSS_RHO_TOL: f64 = 0.08;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s(e: Error) -> String {
    e.to_string()
}

/// Uniform noise in `[-amplitude, amplitude)`.
fn images(n: usize, seed: u64, amplitude: f32) -> Vec<Array3<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Array3::from_shape_simple_fn((3, 32, 32), || rng.random_range(-amplitude..amplitude)))
        .collect()
}

/// Range of mean-subtracted pixel values.
const PIXEL_AMPLITUDE: f32 = 128.0;

fn batch(imgs: &[Array3<f32>]) -> Array4<f32> {
    let views: Vec<_> = imgs.iter().map(|a| a.view()).collect();
    ndarray::stack(ndarray::Axis(0), &views).unwrap()
}

// 1
fn parameter_accounting() -> Check {
    let backbone = Backbone::he_init(BackboneSpec::vgg16(32), 0).map_err(e2s)?;
    ensure(BackboneSpec::vgg16(224).num_parameters() == 14_714_688, "224 px spec count")?;
    let mut got = Vec::new();
    for (units, out_expect) in [(12, 780), (5, 325)] {
        let net = MultiTaskNetwork::build(backbone.clone(), HeadSpec::new(units, 0.3), 1, "x").map_err(e2s)?;
        let counts = (
            net.count_parameters(Part::Backbone),
            net.count_parameters(Part::HiddenLayers),
            net.count_parameters(Part::OutputLayer),
        );
        ensure(counts == (14_714_688, 73_920, out_expect), format!("{units} units: {counts:?}"))?;
        got.push(counts.2);
    }
    Ok(format!("backbone 14,714,688, hidden 73,920, output {} / {}", got[0], got[1]))
}

// 2
/// Rank = 1 + (values strictly below) + (other equal values) / 2.
fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn oracle_spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (oracle_ranks(a), oracle_ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn compare_spearman(a: &[f64], b: &[f64]) -> Result<(), String> {
    match (spearman_rho(a, b), oracle_spearman(a, b)) {
        (Ok(r), Some(o)) if (r - o).abs() <= SPEARMAN_TOL => Ok(()),
        (Err(Error::UndefinedCorrelation(_)), None) => Ok(()),
        (got, want) => Err(format!("{a:?} vs {b:?}: got {got:?}, oracle {want:?}")),
    }
}

fn all_sequences(n: usize, alphabet: usize) -> Vec<Vec<f64>> {
    let total = alphabet.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let d = code % alphabet;
                    code /= alphabet;
                    d as f64
                })
                .collect()
        })
        .collect()
}

fn spearman_oracle() -> Check {
    let mut pairs = 0usize;
    for n in 2..=6 {
        for alphabet in 1..=3 {
            let seqs = all_sequences(n, alphabet);
            for a in &seqs {
                for b in &seqs {
                    compare_spearman(a, b)?;
                    pairs += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..10_000 {
        let n = rng.random_range(2..60);
        let mut draw = || -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    // every third pair carries ties
                    if i % 3 == 0 { (v * 2.0).round() } else { v * 10.0 }
                })
                .collect()
        };
        let (a, b) = (draw(), draw());
        compare_spearman(&a, &b)?;
    }
    Ok(format!("{pairs} exhaustive pairs + 10000 random pairs within {SPEARMAN_TOL:e}"))
}

// 3
fn head_loss(head: &Head, features: &Array4<f64>, mask: &Option<Array2<f64>>, target: &Array2<f64>) -> f64 {
    let (logits, _) = head.forward(features, mask.clone()).unwrap();
    mse_loss(&logits.mapv(sigmoid), target).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(GRAD_DENOM_FLOOR)
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let h = 1e-6;
    for config in 0..20u64 {
        let channels = rng.random_range(2..10);
        let batch = rng.random_range(1..4);
        let spec = HeadSpec {
            hidden_units: (rng.random_range(3..12), rng.random_range(3..10)),
            dropout_rate: [0.0, 0.25, 0.35][config as usize % 3],
            output_units: rng.random_range(1..7),
        };
        let mut head = Head::new(spec.clone(), channels, config).map_err(e2s)?;
        // nonzero biases keep pre-activations off the ReLU kink
        for name in ["fc1", "fc2", "output"] {
            head.layer_mut(name).unwrap().bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let features = Array4::from_shape_simple_fn((batch, channels, 4, 4), || rng.random_range(0.0..3.0));
        let target = Array2::from_shape_simple_fn((batch, spec.output_units), || rng.random_range(0.0..1.0));
        let mask = head.dropout_mask(batch, config + 100);

        let (logits, cache) = head.forward(&features, mask.clone()).map_err(e2s)?;
        let pred = logits.mapv(sigmoid);
        let (_, dpred) = mtaesthetics::training::mse_loss_and_grad(&pred, &target, None).map_err(e2s)?;
        let dlogits = &dpred * &pred.mapv(|p| p * (1.0 - p));
        let mut grads: BTreeMap<_, _> = head.layers().iter().map(|d| (d.name.clone(), d.zero_grad())).collect();
        let dfeatures = head.backward(&cache, &dlogits, &mut grads);

        for name in ["fc1", "fc2", "output"] {
            let g = grads[name].clone();
            let shape = g.weight.dim();
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let orig = head.layer_mut(name).unwrap().weight[[i, j]];
                    head.layer_mut(name).unwrap().weight[[i, j]] = orig + h;
                    let up = head_loss(&head, &features, &mask, &target);
                    head.layer_mut(name).unwrap().weight[[i, j]] = orig - h;
                    let dn = head_loss(&head, &features, &mask, &target);
                    head.layer_mut(name).unwrap().weight[[i, j]] = orig;
                    let e = rel_err(g.weight[[i, j]], (up - dn) / (2.0 * h));
                    ensure(e < GRAD_REL_TOL, format!("config {config} {name}.weight[{i},{j}] rel err {e:e}"))?;
                    worst = worst.max(e);
                    checked += 1;
                }
            }
            for j in 0..g.bias.len() {
                let orig = head.layer_mut(name).unwrap().bias[j];
                head.layer_mut(name).unwrap().bias[j] = orig + h;
                let up = head_loss(&head, &features, &mask, &target);
                head.layer_mut(name).unwrap().bias[j] = orig - h;
                let dn = head_loss(&head, &features, &mask, &target);
                head.layer_mut(name).unwrap().bias[j] = orig;
                let e = rel_err(g.bias[j], (up - dn) / (2.0 * h));
                ensure(e < GRAD_REL_TOL, format!("config {config} {name}.bias[{j}] rel err {e:e} analytic {} numeric {}", g.bias[j], (up - dn) / (2.0 * h)))?;
                worst = worst.max(e);
                checked += 1;
            }
        }
        for (idx, &analytic) in dfeatures.indexed_iter() {
            let mut f = features.clone();
            f[idx] += h;
            let up = head_loss(&head, &f, &mask, &target);
            f[idx] -= 2.0 * h;
            let dn = head_loss(&head, &f, &mask, &target);
            let e = rel_err(analytic, (up - dn) / (2.0 * h));
            ensure(e < GRAD_REL_TOL, format!("config {config} features{idx:?} rel err {e:e}"))?;
            worst = worst.max(e);
            checked += 1;
        }
    }
    Ok(format!("{checked} partials over 20 configs, worst rel err {worst:.2e}"))
}

// 4
fn snapshot(net: &MultiTaskNetwork) -> BTreeMap<String, Vec<u8>> {
    net.to_tensor_file()
        .tensors
        .into_iter()
        .map(|(k, v)| (k.split('.').next().unwrap().to_string(), v.bytes))
        .fold(BTreeMap::new(), |mut acc, (layer, bytes)| {
            acc.entry(layer).or_insert_with(Vec::new).extend(bytes);
            acc
        })
}

fn changed(before: &BTreeMap<String, Vec<u8>>, after: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    before
        .iter()
        .filter(|(k, v)| after.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect()
}

fn freeze_contract() -> Check {
    let backbone = Backbone::he_init(BackboneSpec::vgg16(32), 4).map_err(e2s)?;
    let mut net = MultiTaskNetwork::build(backbone, HeadSpec::new(12, 0.35), 4, "x").map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let source = InMemorySource {
        images: images(6, 6, PIXEL_AMPLITUDE),
        targets: (0..6).map(|_| (0..12).map(|_| rng.random_range(0.0..1.0)).collect()).collect(),
    };
    let mut state = TrainState::new(7);
    let quick = |mut s: StageConfig| {
        s.epochs = 1;
        s.batch_size = 3;
        s
    };
    let s0 = snapshot(&net);
    train_stage(&mut net, &source, None, &quick(StageConfig::stage1()), &mut state, None).map_err(e2s)?;
    let s1 = snapshot(&net);
    let stage1_changed = changed(&s0, &s1);
    ensure(
        stage1_changed == ["fc1", "fc2", "output"],
        format!("stage 1 changed {stage1_changed:?}"),
    )?;
    train_stage(&mut net, &source, None, &quick(StageConfig::stage2()), &mut state, None).map_err(e2s)?;
    let stage2_changed = changed(&s1, &snapshot(&net));
    let want = ["block4_conv2", "block4_conv3", "fc1", "fc2", "output"];
    ensure(stage2_changed == want, format!("stage 2 changed {stage2_changed:?}"))?;
    Ok(format!("stage 1 backbone bit-identical; stage 2 changed {stage2_changed:?}"))
}

// 5
fn lr_values() -> Check {
    let s2 = StageConfig::stage2();
    let got: Vec<f64> = [0, 124, 125, 250].iter().map(|&k| lr_schedule(&s2, k)).collect();
    ensure(got == [1e-4, 1e-4, 5e-5, 2.5e-5], format!("{got:?}"))?;
    Ok(format!("lr(0, 124, 125, 250) = {got:?}"))
}

// 6
/// Per-image colour offsets plus noise at unit amplitude. A random backbone
/// maps full-range pixels to features two orders of magnitude above a
/// pretrained one, saturating the sigmoid; plain noise images give nearly
/// identical features and the hidden units die.
fn distinct_images(n: usize, seed: u64) -> Vec<Array3<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let colour: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            Array3::from_shape_fn((3, 32, 32), |(c, _, _)| colour[c] + rng.random_range(-0.5f32..0.5))
        })
        .collect()
}

fn tiny_overfit() -> Check {
    let backbone = Backbone::he_init(BackboneSpec::vgg16(32), 8).map_err(e2s)?;
    // dropout noise puts a floor under the loss; memorization is checked without it
    let mut net = MultiTaskNetwork::build(backbone, HeadSpec::new(12, 0.0), 8, "x").map_err(e2s)?;
    let imgs = distinct_images(8, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let targets: Vec<Vec<f64>> = (0..8).map(|_| (0..12).map(|_| rng.random_range(0.05..0.95)).collect()).collect();
    let source = InMemorySource {
        images: imgs.clone(),
        targets: targets.clone(),
    };
    let mut stage = StageConfig::stage1();
    stage.learning_rate = 0.01;
    stage.batch_size = 8;
    stage.epochs = 200;
    let mut state = TrainState::new(11);
    train_stage(&mut net, &source, None, &stage, &mut state, None).map_err(e2s)?;
    ensure(state.global_step == 200, format!("{} steps", state.global_step))?;
    let pred = net.forward(&batch(&imgs), mtaesthetics::model::Mode::Eval).map_err(e2s)?;
    let target = Array2::from_shape_fn((8, 12), |(i, j)| targets[i][j]);
    let mse = mse_loss(&pred, &target).map_err(e2s)?;
    ensure(mse < OVERFIT_MSE, format!("training MSE {mse:.2e} after 200 steps"))?;
    Ok(format!("training MSE {mse:.2e} after 200 head-only steps"))
}

// 7
fn gradcam_properties() -> Check {
    let backbone = Backbone::he_init(BackboneSpec::vgg16(32), 12).map_err(e2s)?;
    let net = MultiTaskNetwork::build(backbone, HeadSpec::new(12, 0.35), 12, "x").map_err(e2s)?;
    let img = batch(&images(1, 13, PIXEL_AMPLITUDE));
    for (layer, side) in [("block5_conv3", 2), ("block4_conv3", 4), ("block2_conv1", 16), ("block1_conv2", 32)] {
        for output in [0, 5, 11] {
            let m = grad_cam(&net, &img, output, layer).map_err(e2s)?;
            ensure(m.map.dim() == (side, side), format!("{layer}: map {:?}", m.map.dim()))?;
            ensure(
                m.map.iter().all(|v| (0.0..=1.0).contains(v)),
                format!("{layer}: values outside [0, 1]"),
            )?;
        }
    }
    let mut zero = net.clone();
    zero.head.output.weight.fill(0.0);
    let m = grad_cam(&zero, &img, 0, "block5_conv3").map_err(e2s)?;
    ensure(m.map.iter().all(|&v| v == 0.0), "zero-gradient map not zero")?;
    Ok("zero gradients give a zero map; dims match 4 layers; values in [0, 1]".into())
}

// 8-10
fn gated_config(var: &str) -> Option<Result<PipelineConfig, String>> {
    std::env::var_os(var).map(|p| PipelineConfig::from_file(Path::new(&p)).map_err(e2s))
}

fn dataset_statistics() -> Outcome {
    let (Some(aadb), Some(eva)) = (
        gated_config("MTAESTHETICS_AADB_CONFIG"),
        gated_config("MTAESTHETICS_EVA_CONFIG"),
    ) else {
        return Outcome::Skip("set MTAESTHETICS_AADB_CONFIG and MTAESTHETICS_EVA_CONFIG".into());
    };
    let run = || -> Check {
        let reference = Reference::bundled();
        let aadb = aadb?;
        let schema = AttributeSchema::aadb();
        let partition = load_partition(&aadb, &schema).map_err(e2s)?;
        let test: Vec<f64> = partition.get(Split::Test).iter().map(|r| r.raw_targets[0]).collect();
        let table = interval_frequencies(&test, &reference.aadb_test_frequencies.edges).map_err(e2s)?;
        ensure(
            table.counts == reference.aadb_test_frequencies.counts,
            format!("AADB test counts {:?}", table.counts),
        )?;

        let all: Vec<_> = Split::ALL.iter().flat_map(|&s| partition.get(s)).collect();
        let overall: Vec<f64> = all.iter().map(|r| r.raw_targets[0]).collect();
        let content_idx = schema.target_names().iter().position(|n| n == "content").unwrap();
        let content: Vec<f64> = all.iter().map(|r| r.raw_targets[content_idx]).collect();
        let m = attribute_correlation_matrix(&[overall, content], &["overall".into(), "content".into()]).map_err(e2s)?;
        let rho = m.get("overall", "content").ok_or("undefined (overall, content) rho")?;
        ensure(
            (rho - reference.aadb_ground_truth_overall_content).abs() <= CONTENT_RHO_TOL,
            format!("(overall, content) rho {rho:.4}"),
        )?;

        let eva = eva?;
        let eva_schema = AttributeSchema::eva();
        let votes = eva.votes.as_ref().ok_or("EVA config has no votes file")?;
        let averages = average_votes(&load_votes(votes, &eva_schema).map_err(e2s)?).map_err(e2s)?;
        for (t, name) in eva_schema.target_names().iter().enumerate() {
            let vals = averages.iter().map(|(_, v)| v[t]);
            let min = vals.clone().fold(f64::INFINITY, f64::min);
            let max = vals.fold(f64::NEG_INFINITY, f64::max);
            let (rmin, rmax) = reference.eva_vote_average_ranges[name];
            ensure(
                (min - rmin).abs() <= EVA_RANGE_TOL && (max - rmax).abs() <= EVA_RANGE_TOL,
                format!("EVA {name} range [{min:.4}, {max:.4}] vs [{rmin}, {rmax}]"),
            )?;
        }
        Ok(format!(
            "AADB test counts {:?}; (overall, content) rho {rho:.3}; EVA ranges within {EVA_RANGE_TOL}",
            table.counts
        ))
    };
    match run() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

struct Trained {
    aadb: MultiTaskNetwork,
    eva: MultiTaskNetwork,
    aadb_cfg: PipelineConfig,
    eva_cfg: PipelineConfig,
}

fn full_reproduction() -> (Outcome, Option<Trained>) {
    let full = std::env::var("MTAESTHETICS_FULL_REPRO").is_ok_and(|v| v == "1");
    let (Some(aadb), Some(eva)) = (
        gated_config("MTAESTHETICS_AADB_CONFIG"),
        gated_config("MTAESTHETICS_EVA_CONFIG"),
    ) else {
        return (Outcome::Skip("set MTAESTHETICS_AADB_CONFIG and MTAESTHETICS_EVA_CONFIG".into()), None);
    };
    if !full {
        return (Outcome::Skip("hours of training; set MTAESTHETICS_FULL_REPRO=1".into()), None);
    }
    let mut trained = None;
    let run = || -> Check {
        let reference = Reference::bundled();
        let (aadb, eva) = (aadb?, eva?);
        let mut overall = BTreeMap::new();
        let mut nets = BTreeMap::new();
        let mut aadb_eval = None;
        for (name, cfg) in [("aadb", &aadb), ("eva", &eva)] {
            for single in [false, true] {
                let mut cfg = cfg.clone();
                cfg.single_task = single;
                if single {
                    cfg.output_dir = cfg.output_dir.join("single_task");
                }
                let outcome = run_pipeline(&cfg).map_err(e2s)?;
                let ck = outcome.report.checkpoint(FINE_TUNING_LABEL).ok_or("no fine-tuning eval")?.clone();
                overall.insert((name, single), ck.overall_rho().ok_or("undefined overall rho")?);
                if !single {
                    if name == "aadb" {
                        aadb_eval = Some(ck);
                    }
                    nets.insert(name, outcome.network);
                }
            }
        }
        trained = Some(Trained {
            aadb: nets.remove("aadb").unwrap(),
            eva: nets.remove("eva").unwrap(),
            aadb_cfg: aadb.clone(),
            eva_cfg: eva.clone(),
        });
        let ck = aadb_eval.unwrap();
        for (target, want) in &reference.aadb_attributes[FINE_TUNING_LABEL] {
            let got = ck.rho(target).ok_or(format!("undefined {target} rho"))?;
            ensure(
                (got - want).abs() <= ATTRIBUTE_RHO_TOL,
                format!("AADB {target} rho {got:.3} vs {want}"),
            )?;
        }
        let (am, asg, em, esg) = (
            overall[&("aadb", false)],
            overall[&("aadb", true)],
            overall[&("eva", false)],
            overall[&("eva", true)],
        );
        ensure(am >= AADB_MIN_RHO, format!("AADB overall rho {am:.4}"))?;
        ensure(em >= EVA_MIN_RHO, format!("EVA overall rho {em:.4}"))?;
        ensure(am > asg, format!("AADB multi {am:.4} <= single {asg:.4}"))?;
        ensure(em > esg, format!("EVA multi {em:.4} <= single {esg:.4}"))?;
        Ok(format!(
            "AADB {am:.4} (single {asg:.4}), EVA {em:.4} (single {esg:.4})"
        ))
    };
    let outcome = match run() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    };
    (outcome, trained)
}

fn cross_dataset(trained: Option<&Trained>) -> Outcome {
    let Some(t) = trained else {
        return Outcome::Skip("needs the networks trained for criterion 9".into());
    };
    let run = || -> Check {
        let reference = Reference::bundled();
        let rho_on = |net: &MultiTaskNetwork, cfg: &PipelineConfig, schema: AttributeSchema| -> Result<f64, String> {
            let partition = load_partition(cfg, &schema).map_err(e2s)?;
            let test = partition.get(Split::Test);
            let overall: Vec<f64> = test.iter().map(|r| r.raw_targets[0]).collect();
            let source = record_source(cfg, test, 1).map_err(e2s)?;
            cross_evaluate(net, &source, &overall, cfg.eval_batch_size).map_err(e2s)
        };
        let eva_to_aadb = rho_on(&t.eva, &t.aadb_cfg, AttributeSchema::aadb())?;
        let aadb_to_eva = rho_on(&t.aadb, &t.eva_cfg, AttributeSchema::eva())?;
        let want_ea = reference.cross_rho(Benchmark::Eva, Benchmark::Aadb).unwrap();
        let want_ae = reference.cross_rho(Benchmark::Aadb, Benchmark::Eva).unwrap();
        ensure(eva_to_aadb > aadb_to_eva, format!("EVA->AADB {eva_to_aadb:.3} <= AADB->EVA {aadb_to_eva:.3}"))?;
        ensure((eva_to_aadb - want_ea).abs() <= CROSS_RHO_TOL, format!("EVA->AADB {eva_to_aadb:.3}"))?;
        ensure((aadb_to_eva - want_ae).abs() <= CROSS_RHO_TOL, format!("AADB->EVA {aadb_to_eva:.3}"))?;
        Ok(format!("EVA->AADB {eva_to_aadb:.3} > AADB->EVA {aadb_to_eva:.3}"))
    };
    match run() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

fn from_check(c: Check) -> Outcome {
    match c {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "parameter accounting", from_check(parameter_accounting())),
        (2, "spearman oracle equivalence", from_check(spearman_oracle())),
        (3, "head gradient correctness", from_check(gradient_check())),
        (4, "freeze contract", from_check(freeze_contract())),
        (5, "learning-rate schedule", from_check(lr_values())),
        (6, "tiny overfit", from_check(tiny_overfit())),
        (7, "grad-cam properties", from_check(gradcam_properties())),
        (8, "dataset statistics", dataset_statistics()),
    ];
    let (repro, trained) = full_reproduction();
    results.push((9, "full reproduction", repro));
    results.push((10, "cross-dataset direction", cross_dataset(trained.as_ref())));

    let mut failed = Vec::new();
    for (id, name, outcome) in &results {
        let (tag, msg) = match outcome {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                failed.push(*id);
                ("FAIL", m)
            }
            Outcome::Skip(m) => ("SKIP", m),
        };
        println!("[{tag}] {id:>2} {name}: {msg}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
