use std::collections::BTreeMap;

use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Zip};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::network::{Gradients, MultiTaskNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments<T> {
    m: ArrayD<T>,
    v: ArrayD<T>,
}

impl<T: Float> Moments<T> {
    fn zeros(shape: &[usize]) -> Self {
        Moments {
            m: ArrayD::from_elem(shape, T::zero()),
            v: ArrayD::from_elem(shape, T::zero()),
        }
    }
}

/// Bias-corrected step size for update number `t` (1-based).
pub fn corrected_rate(lr: f64, config: &AdamConfig, t: u64) -> f64 {
    let t = t as i32;
    lr * (1.0 - config.beta2.powi(t)).sqrt() / (1.0 - config.beta1.powi(t))
}

fn update<T: Float>(
    mut param: ArrayViewMutD<'_, T>,
    grad: ArrayViewD<'_, T>,
    state: &mut Moments<T>,
    config: &AdamConfig,
    rate: f64,
) {
    let cast = |x: f64| T::from(x).expect("representable");
    let (b1, b2, eps, rate) = (cast(config.beta1), cast(config.beta2), cast(config.epsilon), cast(rate));
    let one = T::one();
    Zip::from(&mut param)
        .and(&grad)
        .and(&mut state.m)
        .and(&mut state.v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - rate * *m / (v.sqrt() + eps);
        });
}

/// Adam with per-parameter moments keyed by tensor name. Only the layers
/// present in the gradient set are touched.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    steps: u64,
    conv: BTreeMap<String, Moments<f32>>,
    dense: BTreeMap<String, Moments<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            ..Default::default()
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, net: &mut MultiTaskNetwork, grads: &Gradients, lr: f64) -> Result<()> {
        self.steps += 1;
        let rate = corrected_rate(lr, &self.config, self.steps);
        for (name, g) in &grads.conv {
            let layer = net
                .backbone
                .conv_mut(name)
                .ok_or_else(|| Error::Invalid(format!("gradient for unknown layer `{name}`")))?;
            let w = self
                .conv
                .entry(format!("{name}.weight"))
                .or_insert_with(|| Moments::zeros(g.weight.shape()));
            update(layer.weight.view_mut().into_dyn(), g.weight.view().into_dyn(), w, &self.config, rate);
            let b = self
                .conv
                .entry(format!("{name}.bias"))
                .or_insert_with(|| Moments::zeros(g.bias.shape()));
            update(layer.bias.view_mut().into_dyn(), g.bias.view().into_dyn(), b, &self.config, rate);
        }
        for (name, g) in &grads.dense {
            let layer = net
                .head
                .layer_mut(name)
                .ok_or_else(|| Error::Invalid(format!("gradient for unknown layer `{name}`")))?;
            let w = self
                .dense
                .entry(format!("{name}.weight"))
                .or_insert_with(|| Moments::zeros(g.weight.shape()));
            update(layer.weight.view_mut().into_dyn(), g.weight.view().into_dyn(), w, &self.config, rate);
            let b = self
                .dense
                .entry(format!("{name}.bias"))
                .or_insert_with(|| Moments::zeros(g.bias.shape()));
            update(layer.bias.view_mut().into_dyn(), g.bias.view().into_dyn(), b, &self.config, rate);
        }
        Ok(())
    }
}
