use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::records::{ImageRecord, Split};
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Benchmark};

pub const EVA_TOTAL: usize = 4070;
pub const EVA_TRAIN: usize = 3500;
pub const EVA_TEST: usize = 570;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub train: Vec<ImageRecord>,
    pub val: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
}

impl Partition {
    pub fn get(&self, split: Split) -> &[ImageRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// AADB keeps its official partition. Unsplit manifests (EVA, or custom
/// ones without a split column) are shuffled under `seed` and cut
/// 3500:570, scaled proportionally when the record count differs from
/// 4070.
pub fn split_dataset(records: Vec<ImageRecord>, schema: &AttributeSchema, seed: u64) -> Result<Partition> {
    let labelled = records.iter().filter(|r| r.split.is_some()).count();
    let use_official = match schema.benchmark {
        Benchmark::Aadb => {
            if labelled != records.len() || records.is_empty() {
                return Err(Error::Schema(
                    "AADB manifest must carry the official split column for every row".into(),
                ));
            }
            true
        }
        Benchmark::Eva => false,
        Benchmark::Custom => {
            if labelled != 0 && labelled != records.len() {
                return Err(Error::Schema(
                    "split column must be filled for all rows or none".into(),
                ));
            }
            labelled == records.len() && !records.is_empty()
        }
    };

    let mut partition = Partition::default();
    if use_official {
        for r in records {
            match r.split.expect("checked above") {
                Split::Train => partition.train.push(r),
                Split::Val => partition.val.push(r),
                Split::Test => partition.test.push(r),
            }
        }
        return Ok(partition);
    }

    let n = records.len();
    let n_train = if n == EVA_TOTAL {
        EVA_TRAIN
    } else {
        log::warn!("expected {EVA_TOTAL} records, found {n}; keeping the {EVA_TRAIN}:{EVA_TEST} proportion");
        ((n * EVA_TRAIN) as f64 / EVA_TOTAL as f64).round() as usize
    };
    let mut records = records;
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (i, mut r) in records.into_iter().enumerate() {
        if i < n_train {
            r.split = Some(Split::Train);
            partition.train.push(r);
        } else {
            r.split = Some(Split::Test);
            partition.test.push(r);
        }
    }
    Ok(partition)
}
