//! Exploratory Inspection Machine: topographic vector quantization with
//! divergence-based cost, heavy-tailed neighborhood kernels and explicit
//! out-of-sample mapping.

pub mod analysis;
pub mod assignment;
pub mod batch;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod kernels;
pub mod lattice;
pub mod mapping;
pub mod model_file;
pub mod online;
pub mod prototypes;
pub mod rng;
pub mod synth;

pub use error::{Result, XimError};
