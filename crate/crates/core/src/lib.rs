//! Emergent leadership detection from nonverbal behaviour streams.
//!
//! The crate turns per-frame gaze, pose, motion, facial action unit and
//! speaker segmentation streams of small-group meetings into four featuresets,
//! trains one RBF support vector machine per featureset, calibrates its scores
//! with Platt scaling and picks one leader per meeting by late fusion of the
//! calibrated probabilities.
//!
//! Module map:
//!
//! - [`corpus`]: data model, CSV/JSON persistence, window slicing
//! - [`vfoa`], [`pose`], [`face`], [`speech`]: feature extraction
//! - [`svm`]: SMO solver, Platt calibration, group-wise C selection
//! - [`pipeline`]: normalization, training, late fusion, leader selection
//! - [`eval`]: within-/cross-corpus, online and single-feature protocols
//! - [`synth`]: planted-leader corpus generator and brute-force feature oracle

pub mod corpus;
pub mod error;
pub mod eval;
pub mod face;
pub mod pipeline;
pub mod pose;
pub mod speech;
pub mod svm;
pub mod synth;
mod util;
pub mod vfoa;

pub use error::{Error, Result};
