use std::collections::BTreeMap;

use ndarray::{Array2, Array4, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::model::backbone::Layer;
use crate::model::network::MultiTaskNetwork;

/// Last convolution of the final block.
pub const DEFAULT_LAYER: &str = "block5_conv3";

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub layer: String,
    pub output_index: usize,
    /// `(h, w)` of the layer's activations, values in `[0, 1]`.
    pub map: Array2<f64>,
    /// Maximum of the rectified map before normalization.
    pub max: f64,
}

/// Rectified gradient-weighted channel sum. Channel weights are the
/// spatial means of `grads`; the result is divided by its maximum when
/// that is positive. Returns the map and the pre-normalization maximum.
pub fn cam_from(activations: ArrayView3<'_, f32>, grads: ArrayView3<'_, f64>) -> Result<(Array2<f64>, f64)> {
    if activations.dim() != grads.dim() {
        return Err(Error::Shape(format!(
            "activations {:?} vs gradients {:?}",
            activations.dim(),
            grads.dim()
        )));
    }
    let (_, h, w) = activations.dim();
    let mut map = Array2::<f64>::zeros((h, w));
    for (a, g) in activations.axis_iter(Axis(0)).zip(grads.axis_iter(Axis(0))) {
        let weight = g.mean().unwrap_or(0.0);
        if weight != 0.0 {
            map.zip_mut_with(&a, |m, &v| *m += weight * f64::from(v));
        }
    }
    map.mapv_inplace(|v| v.max(0.0));
    let max = map.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        map.mapv_inplace(|v| v / max);
    }
    Ok((map, max))
}

/// Grad-CAM of output `output_index` (pre-sigmoid) at convolution `layer`
/// for a single preprocessed image `(1, 3, H, W)`.
pub fn grad_cam(net: &MultiTaskNetwork, image: &Array4<f32>, output_index: usize, layer: &str) -> Result<ActivationMap> {
    net.backbone.check_input(image)?;
    if image.dim().0 != 1 {
        return Err(Error::Shape(format!("grad_cam takes one image, got {}", image.dim().0)));
    }
    if output_index >= net.output_units() {
        return Err(Error::Invalid(format!(
            "output index {output_index} out of range for {} outputs",
            net.output_units()
        )));
    }
    let conv_names = net.backbone_layer_names();
    let index = match net.backbone.layer_index(layer) {
        Some(i) if matches!(net.backbone.layers[i], Layer::Conv(_)) => i,
        _ => {
            return Err(Error::UnknownLayer {
                name: layer.to_string(),
                valid: conv_names,
            })
        }
    };
    let trace = net.backbone.forward_traced(image.index_axis(Axis(0), 0), index + 1);
    let out = trace.output();
    let features = out.view().insert_axis(Axis(0)).mapv(f64::from);
    let (_, cache) = net.head.forward(&features, None)?;
    let mut one_hot = Array2::zeros((1, net.output_units()));
    one_hot[[0, output_index]] = 1.0;
    let grad_features = net.head.backward(&cache, &one_hot, &mut BTreeMap::new());
    let grad_features = grad_features.index_axis(Axis(0), 0).mapv(|v| v as f32);
    let grad = net
        .backbone
        .backward(&trace, grad_features, index + 1, &mut BTreeMap::new(), true)
        .expect("input gradient requested");
    let acts = trace.activation(index + 1).expect("retained");
    let (map, max) = cam_from(acts.view(), grad.mapv(f64::from).view())?;
    Ok(ActivationMap {
        layer: layer.to_string(),
        output_index,
        map,
        max,
    })
}
