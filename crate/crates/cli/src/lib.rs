//! The `memeforge` pipeline commands as a library: manifest ingestion, OCR,
//! feature extraction, training, cross-validated evaluation, prediction and
//! corpus reports. The binary is a thin argument parser over these.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

pub use commands::*;
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use manifest::{Manifest, ManifestRecord};
