//! Segmentation-grounded scene graph generation on synthetic shape worlds.
//!
//! Two desk-scale datasets are generated: one with graph (relation)
//! annotations and one with instance masks, over lingually overlapping but
//! distinct label vocabularies. A toy two-stage detector is jointly
//! pretrained on both; per-box masks predicted in the mask-annotated label
//! space are transferred zero-shot into the graph label space through a
//! word-embedding similarity matrix, ground scene-graph nodes and edges at
//! pixel level (with a learned Gaussian attention over mask pairs), and are
//! refined by a zero-initialized residual head. Evaluation covers mean
//! recall, zero-shot recall, and mask AP across the PredCls / SGCls / SGDet
//! tasks.

pub mod autodiff;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod grounding;
pub mod harness;
pub mod labels;
pub mod mask_transfer;
pub mod metrics;
pub mod nn;
pub mod refinement;
pub mod rng;
pub mod sgg_core;
pub mod tensorfile;
pub mod worlds;

pub use error::{Result, SggError};
