//! The multi-task network: a pretrained five-block convolutional backbone,
//! global average pooling, a 128-64 ReLU head with dropout, and a sigmoid
//! output layer with one unit per target.

pub mod backbone;
pub mod conv;
pub mod head;
pub mod network;
pub mod tensor_file;

pub use backbone::{Backbone, BackboneSpec, BlockSpec};
pub use head::{Head, HeadSpec};
pub use network::{Gradients, Mode, MultiTaskNetwork, Part, StepOutput};
