//! One-class time-series anomaly state detection.
//!
//! A detector is trained on a standard series, then judges an unseen test
//! series point by point. See the README for the end-to-end workflow.

pub mod bench;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod decision;
pub mod detectors;
pub mod difficulty;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod series;
pub mod shapedist;

pub use error::{Error, Result};
