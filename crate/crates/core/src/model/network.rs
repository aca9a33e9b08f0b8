use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array2, Array3, Array4, Axis};

use crate::error::{Error, Result};
use crate::model::backbone::{stack, zero_grads, Backbone, BackboneSpec, Trace};
use crate::model::conv::ConvGrad;
use crate::model::head::{sigmoid, DenseGrad, Head, HeadSpec, HEAD_LAYERS};
use crate::model::tensor_file::{TensorData, TensorFile};

pub const CHECKPOINT_FORMAT: &str = "mtaesthetics-checkpoint-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, mask drawn from the given seed.
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Backbone,
    HiddenLayers,
    OutputLayer,
    Total,
}

/// Parameter gradients of the trainable layers only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub conv: BTreeMap<String, ConvGrad>,
    pub dense: BTreeMap<String, DenseGrad>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f64,
    pub predictions: Array2<f64>,
    pub gradients: Gradients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskNetwork {
    pub backbone: Backbone,
    pub head: Head,
    /// Trainability of every parameterized layer, backbone then head.
    pub trainable: BTreeMap<String, bool>,
    /// Identifier of the target schema the head was built for.
    pub schema_id: String,
}

impl MultiTaskNetwork {
    /// Attaches a freshly initialized head to `backbone`. Every layer starts
    /// trainable.
    pub fn build(backbone: Backbone, head: HeadSpec, seed: u64, schema_id: impl Into<String>) -> Result<Self> {
        let head = Head::new(head, backbone.spec.feature_channels(), seed)?;
        let trainable = backbone
            .convs()
            .map(|c| (c.name.clone(), true))
            .chain(HEAD_LAYERS.iter().map(|n| (n.to_string(), true)))
            .collect();
        Ok(MultiTaskNetwork {
            backbone,
            head,
            trainable,
            schema_id: schema_id.into(),
        })
    }

    pub fn output_units(&self) -> usize {
        self.head.spec.output_units
    }

    /// Names of every parameterized layer, in forward order.
    pub fn layer_names(&self) -> Vec<String> {
        self.backbone
            .convs()
            .map(|c| c.name.clone())
            .chain(HEAD_LAYERS.iter().map(|n| n.to_string()))
            .collect()
    }

    pub fn backbone_layer_names(&self) -> Vec<String> {
        self.backbone.convs().map(|c| c.name.clone()).collect()
    }

    pub fn is_trainable(&self, layer: &str) -> bool {
        self.trainable.get(layer).copied().unwrap_or(false)
    }

    /// Sets the flag for exactly the named layers. Fails without changing
    /// anything when a name is unknown.
    pub fn set_trainable<S: AsRef<str>>(&mut self, layers: &[S], flag: bool) -> Result<()> {
        for name in layers {
            if !self.trainable.contains_key(name.as_ref()) {
                return Err(Error::UnknownLayer {
                    name: name.as_ref().to_string(),
                    valid: self.layer_names(),
                });
            }
        }
        for name in layers {
            self.trainable.insert(name.as_ref().to_string(), flag);
        }
        Ok(())
    }

    pub fn trainable_layers(&self) -> BTreeSet<String> {
        self.trainable
            .iter()
            .filter(|(_, &t)| t)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn count_parameters(&self, part: Part) -> usize {
        match part {
            Part::Backbone => self.backbone.num_parameters(),
            Part::HiddenLayers => self.head.fc1.num_parameters() + self.head.fc2.num_parameters(),
            Part::OutputLayer => self.head.output.num_parameters(),
            Part::Total => self.head.layers().iter().map(|d| d.num_parameters()).sum::<usize>()
                + self.backbone.num_parameters(),
        }
    }

    fn head_input(features: &Array4<f32>) -> Array4<f64> {
        features.mapv(f64::from)
    }

    /// Pre-sigmoid outputs `(B, outputs)`.
    pub fn logits(&self, images: &Array4<f32>, mode: Mode) -> Result<Array2<f64>> {
        let features = self.backbone.features(images)?;
        let mask = match mode {
            Mode::Eval => None,
            Mode::Train { dropout_seed } => self.head.dropout_mask(images.dim().0, dropout_seed),
        };
        let (logits, _) = self.head.forward(&Self::head_input(&features), mask)?;
        Ok(logits)
    }

    /// Predictions in (0, 1), column 0 the overall score.
    pub fn forward(&self, images: &Array4<f32>, mode: Mode) -> Result<Array2<f64>> {
        Ok(self.logits(images, mode)?.mapv(sigmoid))
    }

    /// Index of the lowest trainable backbone layer, or the layer count
    /// when the whole backbone is frozen.
    fn backprop_floor(&self) -> usize {
        self.backbone
            .layers
            .iter()
            .position(|l| self.is_trainable(l.name()))
            .unwrap_or(self.backbone.layers.len())
    }

    /// One forward/backward pass in train mode.
    ///
    /// `loss_fn` maps predictions to `(loss, d loss / d predictions)`.
    /// Gradients are produced only for trainable layers, and the backbone
    /// is traversed backwards no further than its lowest trainable layer.
    pub fn compute_gradients<F>(&self, images: &Array4<f32>, dropout_seed: u64, loss_fn: F) -> Result<StepOutput>
    where
        F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
    {
        self.backbone.check_input(images)?;
        let floor = self.backprop_floor();
        let traces: Vec<Trace> = images
            .axis_iter(Axis(0))
            .map(|img| self.backbone.forward_traced(img, floor))
            .collect();
        let outs: Vec<Array3<f32>> = traces.iter().map(|t| t.output().clone()).collect();
        let features = Self::head_input(&stack(&outs)?);
        let mask = self.head.dropout_mask(images.dim().0, dropout_seed);
        let (logits, cache) = self.head.forward(&features, mask)?;
        let predictions = logits.mapv(sigmoid);
        let (loss, grad_pred) = loss_fn(&predictions)?;
        let grad_logits = &grad_pred * &predictions.mapv(|p| p * (1.0 - p));

        let mut dense: BTreeMap<String, DenseGrad> = self
            .head
            .layers()
            .into_iter()
            .filter(|d| self.is_trainable(&d.name))
            .map(|d| (d.name.clone(), d.zero_grad()))
            .collect();
        let grad_features = self.head.backward(&cache, &grad_logits, &mut dense);

        let mut conv = zero_grads(self.backbone.convs().filter(|c| self.is_trainable(&c.name)));
        if !conv.is_empty() {
            for (trace, g) in traces.iter().zip(grad_features.axis_iter(Axis(0))) {
                let g = g.mapv(|v| v as f32);
                self.backbone.backward(trace, g, floor, &mut conv, false);
            }
        }
        Ok(StepOutput {
            loss,
            predictions,
            gradients: Gradients { conv, dense },
        })
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut file = TensorFile::default();
        self.backbone.to_tensors(&mut file);
        for d in self.head.layers() {
            file.insert(format!("{}.weight", d.name), TensorData::from_f64(&d.weight.clone().into_dyn()));
            file.insert(format!("{}.bias", d.name), TensorData::from_f64(&d.bias.clone().into_dyn()));
        }
        let meta = &mut file.metadata;
        meta.insert("format".into(), CHECKPOINT_FORMAT.into());
        meta.insert("schema_id".into(), self.schema_id.clone());
        meta.insert("output_units".into(), self.output_units().to_string());
        meta.insert(
            "head".into(),
            serde_json::to_string(&self.head.spec).expect("plain struct"),
        );
        meta.insert(
            "backbone".into(),
            serde_json::to_string(&self.backbone.spec).expect("plain struct"),
        );
        meta.insert(
            "trainable".into(),
            serde_json::to_string(&self.trainable).expect("plain map"),
        );
        file
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_tensor_file().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = TensorFile::read(path)?;
        Self::from_tensor_file(&file).map_err(|e| match e {
            Error::Load(msg) => Error::Load(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        let meta = |key: &str| {
            file.metadata
                .get(key)
                .ok_or_else(|| Error::Load(format!("checkpoint metadata lacks `{key}`")))
        };
        if meta("format")? != CHECKPOINT_FORMAT {
            return Err(Error::Load(format!("not a {CHECKPOINT_FORMAT} file")));
        }
        let json_err = |e: serde_json::Error| Error::Load(e.to_string());
        let head_spec: HeadSpec = serde_json::from_str(meta("head")?).map_err(json_err)?;
        let backbone_spec: BackboneSpec = serde_json::from_str(meta("backbone")?).map_err(json_err)?;
        let trainable: BTreeMap<String, bool> = serde_json::from_str(meta("trainable")?).map_err(json_err)?;
        let units: usize = meta("output_units")?
            .parse()
            .map_err(|_| Error::Load("bad output_units".into()))?;
        if units != head_spec.output_units {
            return Err(Error::Load("output_units disagrees with head spec".into()));
        }

        let backbone = Backbone::from_tensors(backbone_spec, file)?;
        let mut head = Head::new(head_spec, backbone.spec.feature_channels(), 0)?;
        for name in HEAD_LAYERS {
            let layer = head.layer_mut(name).expect("known head layer");
            let w = file
                .f64_tensor(&format!("{name}.weight"))?
                .into_dimensionality()
                .map_err(|e| Error::Load(format!("{name}.weight: {e}")))?;
            let b = file
                .f64_tensor(&format!("{name}.bias"))?
                .into_dimensionality()
                .map_err(|e| Error::Load(format!("{name}.bias: {e}")))?;
            if w.raw_dim() != layer.weight.raw_dim() || b.raw_dim() != layer.bias.raw_dim() {
                return Err(Error::Load(format!("{name}: shape mismatch")));
            }
            layer.weight = w;
            layer.bias = b;
        }
        let mut net = MultiTaskNetwork::build(backbone, head.spec.clone(), 0, meta("schema_id")?.clone())?;
        net.head = head;
        if trainable.keys().collect::<Vec<_>>() != net.trainable.keys().collect::<Vec<_>>() {
            return Err(Error::Load("trainability mask does not match layers".into()));
        }
        net.trainable = trainable;
        Ok(net)
    }
}
