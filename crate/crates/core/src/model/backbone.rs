//! Five-block VGG-style convolutional feature extractor.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array3, Array4, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::conv::{max_pool, max_pool_backward, Conv2d, ConvGrad, KERNEL};
use crate::model::tensor_file::{TensorData, TensorFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub convs: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub blocks: Vec<BlockSpec>,
    pub input_channels: usize,
    /// Square input resolution the network accepts.
    pub input_size: usize,
}

impl BackboneSpec {
    /// VGG16 convolutional part: 2, 2, 3, 3, 3 convolutions of 64, 128,
    /// 256, 512, 512 channels.
    pub fn vgg16(input_size: usize) -> Self {
        let blocks = [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)]
            .into_iter()
            .map(|(convs, channels)| BlockSpec { convs, channels })
            .collect();
        BackboneSpec {
            blocks,
            input_channels: 3,
            input_size,
        }
    }

    pub fn feature_channels(&self) -> usize {
        self.blocks.last().map_or(self.input_channels, |b| b.channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() != 5 {
            return Err(Error::Config(format!(
                "backbone must have exactly five blocks, got {}",
                self.blocks.len()
            )));
        }
        if self.blocks.iter().any(|b| b.convs == 0 || b.channels == 0) {
            return Err(Error::Config("empty backbone block".into()));
        }
        if self.input_size < 1 << self.blocks.len() {
            return Err(Error::Config(format!(
                "input size {} too small for {} pooling stages",
                self.input_size,
                self.blocks.len()
            )));
        }
        Ok(())
    }

    /// Spatial size of the final feature map.
    pub fn feature_size(&self) -> usize {
        self.input_size >> self.blocks.len()
    }

    /// `(name, in_channels, out_channels)` of every convolution, in order.
    pub fn conv_layout(&self) -> Vec<(String, usize, usize)> {
        let mut layout = Vec::new();
        let mut cin = self.input_channels;
        for (b, block) in self.blocks.iter().enumerate() {
            for i in 0..block.convs {
                layout.push((format!("block{}_conv{}", b + 1, i + 1), cin, block.channels));
                cin = block.channels;
            }
        }
        layout
    }

    pub fn num_parameters(&self) -> usize {
        self.conv_layout()
            .iter()
            .map(|(_, i, o)| i * o * KERNEL * KERNEL + o)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    Pool { name: String },
}

impl Layer {
    pub fn name(&self) -> &str {
        match self {
            Layer::Conv(c) => &c.name,
            Layer::Pool { name } => name,
        }
    }

    fn forward(&self, x: ArrayView3<'_, f32>) -> Array3<f32> {
        match self {
            Layer::Conv(c) => c.forward(x),
            Layer::Pool { .. } => max_pool(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub spec: BackboneSpec,
    pub layers: Vec<Layer>,
}

/// Per-image activations kept by a forward pass. `acts[0]` is the input
/// and `acts[i + 1]` the output of layer `i`; entries below the retention
/// boundary are dropped to save memory.
#[derive(Debug, Clone)]
pub struct Trace {
    pub retain_from: usize,
    pub acts: Vec<Option<Array3<f32>>>,
}

impl Trace {
    pub fn output(&self) -> &Array3<f32> {
        self.acts.last().and_then(Option::as_ref).expect("output is always kept")
    }

    pub fn activation(&self, index: usize) -> Option<&Array3<f32>> {
        self.acts.get(index).and_then(Option::as_ref)
    }
}

impl Backbone {
    fn from_convs(spec: BackboneSpec, mut convs: impl FnMut(&str, usize, usize) -> Result<Conv2d>) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut layout = spec.conv_layout().into_iter();
        for (b, block) in spec.blocks.iter().enumerate() {
            for _ in 0..block.convs {
                let (name, cin, cout) = layout.next().expect("layout matches blocks");
                layers.push(Layer::Conv(convs(&name, cin, cout)?));
            }
            layers.push(Layer::Pool {
                name: format!("block{}_pool", b + 1),
            });
        }
        Ok(Backbone { spec, layers })
    }

    /// Randomly initialized backbone (He normal), for tests and for runs
    /// without pretrained weights.
    pub fn he_init(spec: BackboneSpec, seed: u64) -> Result<Self> {
        let mut k = 0u64;
        Self::from_convs(spec, |name, cin, cout| {
            k += 1;
            Ok(Conv2d::he_normal(name, cin, cout, seed.wrapping_add(k)))
        })
    }

    /// Loads `<layer>.weight` `(out, in, 3, 3)` and `<layer>.bias` tensors
    /// from a weight file.
    pub fn load(spec: BackboneSpec, path: &Path) -> Result<Self> {
        let file = TensorFile::read(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Load(format!("backbone weights {}: {source}", path.display())),
            other => other,
        })?;
        Self::from_tensors(spec, &file)
    }

    pub fn from_tensors(spec: BackboneSpec, file: &TensorFile) -> Result<Self> {
        Self::from_convs(spec, |name, cin, cout| {
            let weight = file.f32_tensor(&format!("{name}.weight"))?;
            let bias = file.f32_tensor(&format!("{name}.bias"))?;
            let weight = weight
                .into_dimensionality::<ndarray::Ix4>()
                .ok()
                .filter(|w| w.dim() == (cout, cin, KERNEL, KERNEL))
                .ok_or_else(|| Error::Load(format!("{name}.weight: expected shape [{cout}, {cin}, 3, 3]")))?;
            let bias = bias
                .into_dimensionality::<ndarray::Ix1>()
                .ok()
                .filter(|b| b.len() == cout)
                .ok_or_else(|| Error::Load(format!("{name}.bias: expected shape [{cout}]")))?;
            Ok(Conv2d {
                name: name.to_string(),
                weight: weight.as_standard_layout().into_owned(),
                bias: bias.as_standard_layout().into_owned(),
            })
        })
    }

    pub fn to_tensors(&self, file: &mut TensorFile) {
        for conv in self.convs() {
            file.insert(format!("{}.weight", conv.name), TensorData::from_f32(&conv.weight.clone().into_dyn()));
            file.insert(format!("{}.bias", conv.name), TensorData::from_f32(&conv.bias.clone().into_dyn()));
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = TensorFile::default();
        self.to_tensors(&mut file);
        file.write(path)
    }

    pub fn convs(&self) -> impl Iterator<Item = &Conv2d> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            Layer::Pool { .. } => None,
        })
    }

    pub fn conv_mut(&mut self, name: &str) -> Option<&mut Conv2d> {
        self.layers.iter_mut().find_map(|l| match l {
            Layer::Conv(c) if c.name == name => Some(c),
            _ => None,
        })
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name() == name)
    }

    pub fn num_parameters(&self) -> usize {
        self.convs().map(Conv2d::num_parameters).sum()
    }

    /// Checks a `(B, C, H, W)` batch against the expected input shape.
    pub fn check_input(&self, images: &Array4<f32>) -> Result<()> {
        let (_, c, h, w) = images.dim();
        let s = self.spec.input_size;
        if c != self.spec.input_channels || h != s || w != s {
            return Err(Error::Shape(format!(
                "backbone expects ({}, {s}, {s}) inputs, got ({c}, {h}, {w})",
                self.spec.input_channels
            )));
        }
        Ok(())
    }

    /// Runs one image through every layer, keeping activations
    /// `acts[retain_from..]`.
    pub fn forward_traced(&self, image: ArrayView3<'_, f32>, retain_from: usize) -> Trace {
        let n = self.layers.len();
        let retain_from = retain_from.min(n);
        let mut acts: Vec<Option<Array3<f32>>> = vec![None; n + 1];
        let mut current = image.to_owned();
        if retain_from == 0 {
            acts[0] = Some(current.clone());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(current.view());
            if i + 1 >= retain_from && i + 1 < n {
                acts[i + 1] = Some(next.clone());
            }
            current = next;
        }
        acts[n] = Some(current);
        Trace { retain_from, acts }
    }

    /// Final feature maps `(B, C, h, w)` for a batch.
    pub fn features(&self, images: &Array4<f32>) -> Result<Array4<f32>> {
        self.check_input(images)?;
        let n = self.layers.len();
        let outs: Vec<Array3<f32>> = images
            .axis_iter(Axis(0))
            .map(|img| self.forward_traced(img, n).acts[n].take().expect("kept"))
            .collect();
        stack(&outs)
    }

    /// Backpropagates from the final feature map down to layer `stop_at`.
    ///
    /// Parameter gradients are accumulated for convolutions named in
    /// `trainable`. Returns the gradient with respect to `acts[stop_at]`
    /// when `want_input_grad` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_features: Array3<f32>,
        stop_at: usize,
        grads: &mut BTreeMap<String, ConvGrad>,
        want_input_grad: bool,
    ) -> Option<Array3<f32>> {
        assert!(stop_at >= trace.retain_from, "activations below stop_at were dropped");
        let n = self.layers.len();
        let mut grad = grad_features;
        for i in (stop_at..n).rev() {
            let input = trace.acts[i].as_ref().expect("retained input");
            let output = trace.acts[i + 1].as_ref().expect("retained output");
            let need_input = i > stop_at || want_input_grad;
            let next = match &self.layers[i] {
                Layer::Conv(conv) => {
                    let acc = grads.get_mut(&conv.name);
                    if acc.is_none() && !need_input {
                        return None;
                    }
                    conv.backward(input.view(), output.view(), grad.view(), acc, need_input)
                }
                Layer::Pool { .. } => need_input.then(|| max_pool_backward(input.view(), grad.view())),
            };
            grad = next?;
        }
        Some(grad)
    }
}

pub(crate) fn stack(items: &[Array3<f32>]) -> Result<Array4<f32>> {
    let views: Vec<_> = items.iter().map(|a| a.view()).collect();
    ndarray::stack(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}

pub(crate) fn zero_grads<'a>(convs: impl Iterator<Item = &'a Conv2d>) -> BTreeMap<String, ConvGrad> {
    convs.map(|c| (c.name.clone(), c.zero_grad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg16_parameter_count() {
        assert_eq!(BackboneSpec::vgg16(224).num_parameters(), 14_714_688);
    }

    #[test]
    fn layer_names_and_order() {
        let bb = Backbone::he_init(BackboneSpec::vgg16(32), 1).unwrap();
        let names: Vec<&str> = bb.layers.iter().map(Layer::name).collect();
        assert_eq!(names.len(), 18);
        assert_eq!(names[0], "block1_conv1");
        assert_eq!(names[2], "block1_pool");
        assert_eq!(names[12], "block4_conv3");
        assert_eq!(names[17], "block5_pool");
        assert_eq!(bb.num_parameters(), 14_714_688);
    }

    #[test]
    fn rejects_wrong_block_count() {
        let mut spec = BackboneSpec::vgg16(224);
        spec.blocks.pop();
        assert!(Backbone::he_init(spec, 0).is_err());
    }

    #[test]
    fn weights_round_trip_through_file() {
        let spec = BackboneSpec {
            blocks: vec![BlockSpec { convs: 1, channels: 2 }; 5],
            input_channels: 3,
            input_size: 32,
        };
        let bb = Backbone::he_init(spec.clone(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.safetensors");
        bb.save(&p).unwrap();
        assert_eq!(Backbone::load(spec.clone(), &p).unwrap(), bb);

        let mut wrong = spec;
        wrong.blocks[0].channels = 3;
        assert!(matches!(Backbone::load(wrong, &p), Err(Error::Load(_))));
        assert!(matches!(
            Backbone::load(BackboneSpec::vgg16(32), &dir.path().join("missing.safetensors")),
            Err(Error::Load(_))
        ));
    }
}
