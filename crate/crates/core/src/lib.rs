//! Multi-task convolutional regression for image aesthetic assessment.
//!
//! A VGG16-style backbone feeds a small shared head that predicts an
//! overall aesthetic score together with per-attribute scores. The crate
//! covers label ingestion ([`dataset`]), the network ([`model`]), two-stage
//! training ([`training`]), rank-correlation evaluation ([`evaluation`]),
//! and Grad-CAM maps ([`explain`]).

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod model;
pub mod plot;
pub mod schema;
pub mod training;

pub use error::{Error, ErrorClass, Result};
pub use schema::{AttributeSchema, Benchmark};
