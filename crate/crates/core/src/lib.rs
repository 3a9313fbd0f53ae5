//! Unsupervised color anomaly detection for multispectral (RGB + thermal)
//! aerial imagery and the integral images produced by averaging aligned views.
//!
//! The pipeline:
//!
//! 1. [`scene`] loads view stacks and rectangle labels from a JSON manifest
//!    (or [`synth`] generates a seeded occluded scene).
//! 2. [`integrator`] averages aligned views into an integral image.
//! 3. [`colorspace`] converts RGB to HLS/HSV/LAB/LUV/XYZ/YUV and optionally
//!    stacks the thermal plane as a fourth channel.
//! 4. [`detectors`] score every pixel (RXG, RXM, RXL, PCA, GMM, CBAD, LOF).
//! 5. [`metrics`] turn scores into precision-recall curves, AUPRC and
//!    F-beta-optimal thresholds; [`heatmap`] renders them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod colorspace;
pub mod detectors;
pub mod error;
pub mod heatmap;
pub mod integrator;
pub mod labels;
pub mod metrics;
pub mod scene;
pub mod synth;
pub mod tensor;

pub use colorspace::{ColorSpace, ColorSpaceId};
pub use detectors::{detect, DetectorConfig, Method};
pub use error::{Error, Result};
pub use labels::{rasterize_labels, LabelMask, Rect};
pub use metrics::{EvalConfig, PrCurve};
pub use scene::{load_scene, Scene, SceneKind};
pub use synth::{synth_scene, SynthConfig};
pub use tensor::{ImageTensor, SampleMatrix, ScoreMap};
