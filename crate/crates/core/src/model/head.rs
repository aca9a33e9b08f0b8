//! Regression head: global average pooling, two ReLU layers, dropout on
//! the second, and one sigmoid output layer shared by every target.
//!
//! The head runs in f64; it is small, and the extra precision makes
//! finite-difference gradient checks meaningful.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub hidden_units: (usize, usize),
    pub dropout_rate: f64,
    pub output_units: usize,
}

impl HeadSpec {
    pub fn new(output_units: usize, dropout_rate: f64) -> Self {
        HeadSpec {
            hidden_units: (128, 64),
            dropout_rate,
            output_units,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units.0 == 0 || self.hidden_units.1 == 0 || self.output_units == 0 {
            return Err(Error::Config("head dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Fully-connected layer, weights `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub name: String,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Upper bound of the Glorot-uniform distribution.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Dense {
    pub fn glorot_uniform(name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = glorot_bound(fan_in, fan_out);
        Dense {
            name: name.into(),
            weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, acc: Option<&mut DenseGrad>) -> Array2<f64> {
        if let Some(acc) = acc {
            acc.weight += &x.t().dot(dy);
            acc.bias += &dy.sum_axis(Axis(0));
        }
        dy.dot(&self.weight.t())
    }

    pub fn zero_grad(&self) -> DenseGrad {
        DenseGrad {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

pub const HEAD_LAYERS: [&str; 3] = ["fc1", "fc2", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub spec: HeadSpec,
    pub fc1: Dense,
    pub fc2: Dense,
    pub output: Dense,
}

/// Intermediate values of a head forward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    spatial: (usize, usize),
    pooled: Array2<f64>,
    hidden1: Array2<f64>,
    hidden2: Array2<f64>,
    mask: Option<Array2<f64>>,
    dropped: Array2<f64>,
}

impl Head {
    /// Glorot-uniform weights drawn in layer order from one seeded stream;
    /// biases start at zero.
    pub fn new(spec: HeadSpec, in_channels: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h1, h2) = spec.hidden_units;
        let fc1 = Dense::glorot_uniform("fc1", in_channels, h1, &mut rng);
        let fc2 = Dense::glorot_uniform("fc2", h1, h2, &mut rng);
        let output = Dense::glorot_uniform("output", h2, spec.output_units, &mut rng);
        Ok(Head { spec, fc1, fc2, output })
    }

    pub fn layers(&self) -> [&Dense; 3] {
        [&self.fc1, &self.fc2, &self.output]
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Dense> {
        match name {
            "fc1" => Some(&mut self.fc1),
            "fc2" => Some(&mut self.fc2),
            "output" => Some(&mut self.output),
            _ => None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.fc1.weight.dim().0
    }

    /// Inverted-dropout mask: each unit kept with probability `1 - rate`
    /// and scaled by `1 / (1 - rate)`.
    pub fn dropout_mask(&self, batch: usize, seed: u64) -> Option<Array2<f64>> {
        let rate = self.spec.dropout_rate;
        if rate == 0.0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (1.0 - rate);
        Some(Array2::from_shape_fn((batch, self.spec.hidden_units.1), |_| {
            if rng.random_bool(rate) { 0.0 } else { scale }
        }))
    }

    /// Feature maps `(B, C, h, w)` to pre-sigmoid outputs `(B, outputs)`.
    pub fn forward(&self, features: &Array4<f64>, mask: Option<Array2<f64>>) -> Result<(Array2<f64>, HeadCache)> {
        let (b, c, h, w) = features.dim();
        if c != self.in_channels() {
            return Err(Error::Shape(format!(
                "head expects {} feature channels, got {c}",
                self.in_channels()
            )));
        }
        if h * w == 0 {
            return Err(Error::Shape("empty feature map".into()));
        }
        let pooled = features
            .view()
            .into_shape_with_order((b, c, h * w))
            .map_err(|e| Error::Shape(e.to_string()))?
            .mean_axis(Axis(2))
            .expect("non-empty");
        let hidden1 = self.fc1.forward(&pooled).mapv(relu);
        let hidden2 = self.fc2.forward(&hidden1).mapv(relu);
        let dropped = match &mask {
            Some(m) => &hidden2 * m,
            None => hidden2.clone(),
        };
        let logits = self.output.forward(&dropped);
        Ok((
            logits,
            HeadCache {
                spatial: (h, w),
                pooled,
                hidden1,
                hidden2,
                mask,
                dropped,
            },
        ))
    }

    /// Backpropagates `d loss / d logits`, accumulating into `grads` for
    /// the layers present there. Returns the gradient with respect to the
    /// feature maps.
    pub fn backward(
        &self,
        cache: &HeadCache,
        grad_logits: &Array2<f64>,
        grads: &mut BTreeMap<String, DenseGrad>,
    ) -> Array4<f64> {
        let d_dropped = self
            .output
            .backward(&cache.dropped, grad_logits, grads.get_mut("output"));
        let mut d_hidden2 = match &cache.mask {
            Some(m) => d_dropped * m,
            None => d_dropped,
        };
        relu_backward(&mut d_hidden2, &cache.hidden2);
        let mut d_hidden1 = self.fc2.backward(&cache.hidden1, &d_hidden2, grads.get_mut("fc2"));
        relu_backward(&mut d_hidden1, &cache.hidden1);
        let d_pooled = self.fc1.backward(&cache.pooled, &d_hidden1, grads.get_mut("fc1"));
        let (h, w) = cache.spatial;
        let (b, c) = d_pooled.dim();
        let scale = 1.0 / (h * w) as f64;
        Array4::from_shape_fn((b, c, h, w), |(i, j, _, _)| d_pooled[[i, j]] * scale)
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn relu_backward(grad: &mut Array2<f64>, activated: &Array2<f64>) {
    grad.zip_mut_with(activated, |g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
