//! Weakly-supervised video anomaly detection from video-level labels.
//!
//! Videos arrive as matrices of precomputed fragment features. A two-layer
//! scorer assigns each fragment an anomaly score; during training, two-way
//! k-means on the scorer's hidden layer produces fragment pseudo-labels for
//! anomalous videos and a center-distance loss that shapes the hidden space.
//!
//! Module map:
//!
//! - [`types`], [`matrix`], [`rng`]: dataset model, dense matrices, seeded randomness
//! - [`ingest`]: manifest and feature files, synthetic data
//! - [`network`]: scorer, backpropagation, Adam, checkpoints
//! - [`clustering`]: two-way k-means and its center-distance gradient
//! - [`selfreason`]: pseudo-label orientation and training targets
//! - [`objective`]: regression and clustering losses
//! - [`train`]: the training loop and its history
//! - [`eval`]: frame-level scores, ROC-AUC, annotations
//! - [`cli`]: the `srad` command line

pub mod cli;
pub mod clustering;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod network;
pub mod objective;
pub mod rng;
pub mod selfreason;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use matrix::{FragmentMatrix, Matrix};
pub use rng::RngHandle;
pub use types::{validate_dataset, Dataset, VideoLabel, VideoRecord};
