//! Core of a Domain-Aware correlation tracker: a weighted-dynamic robust
//! loss family, Gaussian soft-label ridge regression (closed form and a small
//! convolutional net), gradient-based channel selection, and a scale-pyramid
//! template tracker, with a synthetic-sequence harness for verification.

pub mod error;
pub mod features;
pub mod bench;
pub mod config;
pub mod labels;
pub mod loss;
pub mod net;
pub mod ridge;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
