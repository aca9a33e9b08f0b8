use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Array4, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::image::{encode_image, flip_in_place};
use crate::dataset::records::ImageRecord;
use crate::error::{Error, Result};

/// Images `(B, 3, H, W)` plus normalized targets `(B, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub images: Array4<f32>,
    pub targets: Array2<f64>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.images.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random-access collection of encoded samples.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Preprocessed `(3, H, W)` image.
    fn image(&self, index: usize) -> Result<Array3<f32>>;

    /// Normalized targets, truncated to the network's output count.
    fn targets(&self, index: usize) -> &[f64];
}

/// Samples backed by image files on disk, decoded on demand.
pub struct RecordSource {
    paths: Vec<PathBuf>,
    targets: Vec<Vec<f64>>,
    input_size: usize,
}

impl RecordSource {
    /// `outputs` keeps the first targets of each record: 1 for a
    /// single-task network, K + 1 otherwise.
    pub fn new(records: &[ImageRecord], image_root: &Path, input_size: usize, outputs: usize) -> Result<Self> {
        let mut paths = Vec::with_capacity(records.len());
        let mut targets = Vec::with_capacity(records.len());
        for r in records {
            if r.normalized_targets.len() < outputs {
                return Err(Error::Shape(format!(
                    "record {} has {} targets, need {outputs}",
                    r.image.display(),
                    r.normalized_targets.len()
                )));
            }
            paths.push(image_root.join(&r.image));
            targets.push(r.normalized_targets[..outputs].to_vec());
        }
        Ok(RecordSource {
            paths,
            targets,
            input_size,
        })
    }
}

impl SampleSource for RecordSource {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn image(&self, index: usize) -> Result<Array3<f32>> {
        encode_image(&self.paths[index], self.input_size)
    }

    fn targets(&self, index: usize) -> &[f64] {
        &self.targets[index]
    }
}

/// Pre-encoded samples held in memory.
#[derive(Debug, Clone)]
pub struct InMemorySource {
    pub images: Vec<Array3<f32>>,
    pub targets: Vec<Vec<f64>>,
}

impl SampleSource for InMemorySource {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn image(&self, index: usize) -> Result<Array3<f32>> {
        Ok(self.images[index].clone())
    }

    fn targets(&self, index: usize) -> &[f64] {
        &self.targets[index]
    }
}

/// Sample order and flip coins for one epoch, a pure function of
/// `(seed, epoch)`. Each sample is flipped with probability 0.5 when
/// `augment` is set.
pub fn epoch_plan(n: usize, seed: u64, epoch: u64, augment: bool) -> Vec<(usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
        .into_iter()
        .map(|i| (i, augment && rng.random_bool(0.5)))
        .collect()
}

/// Stacks the given `(index, flip)` samples into a batch.
pub fn assemble_batch(source: &dyn SampleSource, plan: &[(usize, bool)]) -> Result<EncodedBatch> {
    let first = plan
        .first()
        .ok_or_else(|| Error::Invalid("empty batch".into()))?;
    let probe = source.image(first.0)?;
    let (c, h, w) = probe.dim();
    let outputs = source.targets(first.0).len();
    let mut images = Array4::<f32>::zeros((plan.len(), c, h, w));
    let mut targets = Array2::<f64>::zeros((plan.len(), outputs));
    for (b, &(index, flip)) in plan.iter().enumerate() {
        let mut img = if b == 0 { probe.clone() } else { source.image(index)? };
        if img.dim() != (c, h, w) {
            return Err(Error::Shape(format!(
                "sample {index} has shape {:?}, batch expects {:?}",
                img.dim(),
                (c, h, w)
            )));
        }
        if flip {
            flip_in_place(&mut img);
        }
        images.index_axis_mut(Axis(0), b).assign(&img);
        for (t, &v) in source.targets(index).iter().enumerate() {
            targets[[b, t]] = v;
        }
    }
    Ok(EncodedBatch { images, targets })
}
