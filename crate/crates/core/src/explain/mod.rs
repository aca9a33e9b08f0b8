//! Grad-CAM activation maps and heatmap overlays.

pub mod gradcam;
pub mod overlay;

pub use gradcam::{cam_from, grad_cam, ActivationMap, DEFAULT_LAYER};
pub use overlay::{blend, jet, overlay, upsample};
