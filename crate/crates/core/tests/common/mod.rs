//! Synthetic datasets on disk for end-to-end runs.

use std::fmt::Write;
use std::path::Path;

use mtaesthetics::config::PipelineConfig;
use mtaesthetics::model::{Backbone, BackboneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INPUT_SIZE: usize = 32;
pub const WEIGHTS: &str = "vgg16.safetensors";

fn write_images(dir: &Path, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    (0..n)
        .map(|i| {
            let base: [u8; 3] = rng.random();
            let img = image::RgbImage::from_fn(40, 36, |x, y| {
                image::Rgb([
                    base[0].wrapping_add((x * 3) as u8),
                    base[1].wrapping_add((y * 5) as u8),
                    base[2],
                ])
            });
            let name = format!("img{i:03}.png");
            img.save(images.join(&name)).unwrap();
            name
        })
        .collect()
}

fn write_backbone(dir: &Path) {
    Backbone::he_init(BackboneSpec::vgg16(INPUT_SIZE), 99)
        .unwrap()
        .save(&dir.join(WEIGHTS))
        .unwrap();
}

/// AADB manifest with an official split column: 16 train, 4 val, 4 test.
pub fn aadb_fixture(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let names = write_images(dir, 24, &mut rng);
    let schema = mtaesthetics::AttributeSchema::aadb();
    let mut csv = format!("image,overall,{},split\n", schema.attribute_names.join(","));
    for (i, name) in names.iter().enumerate() {
        write!(csv, "{name},{:.3}", rng.random_range(0.0..1.0)).unwrap();
        for attr in &schema.attribute_names {
            let v = if attr == "repetition" || attr == "symmetry" {
                rng.random_range(0.0..1.0)
            } else {
                rng.random_range(-1.0..1.0)
            };
            write!(csv, ",{v:.3}").unwrap();
        }
        let split = match i {
            0..16 => "train",
            16..20 => "val",
            _ => "test",
        };
        writeln!(csv, ",{split}").unwrap();
    }
    std::fs::write(dir.join("manifest.csv"), csv).unwrap();
    write_backbone(dir);
    std::fs::write(
        dir.join("aadb.toml"),
        format!(
            "dataset = \"aadb\"\nmanifest = \"manifest.csv\"\nbackbone_weights = \"{WEIGHTS}\"\n{}",
            SMALL_RUN
        ),
    )
    .unwrap();
}

/// EVA votes, three raters per image with a few skipped attributes.
pub fn eva_fixture(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let names = write_images(dir, 30, &mut rng);
    let mut csv = String::from("image,rater,overall,light_and_color,composition_and_depth,quality,semantics\n");
    for name in &names {
        for rater in 0..3 {
            write!(csv, "{name},r{rater},{}", rng.random_range(0..=10)).unwrap();
            for _ in 0..4 {
                if rater == 2 && rng.random_bool(0.2) {
                    csv.push(',');
                } else {
                    write!(csv, ",{}", rng.random_range(1..=4)).unwrap();
                }
            }
            csv.push('\n');
        }
    }
    std::fs::write(dir.join("votes.csv"), csv).unwrap();
    write_backbone(dir);
    std::fs::write(
        dir.join("eva.toml"),
        format!(
            "dataset = \"eva\"\nvotes = \"votes.csv\"\nbackbone_weights = \"{WEIGHTS}\"\n{}",
            SMALL_RUN
        ),
    )
    .unwrap();
}

const SMALL_RUN: &str = "input_size = 32
stage1_epochs = 1
stage1_batch_size = 8
stage2_epochs = 1
stage2_batch_size = 8
eval_batch_size = 8
";

pub fn load(dir: &Path, file: &str) -> PipelineConfig {
    let text = std::fs::read_to_string(dir.join(file)).unwrap();
    let mut cfg = PipelineConfig::parse(&text).unwrap();
    cfg.resolve_paths(dir, dir);
    cfg
}
