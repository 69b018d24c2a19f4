//! Configuration, dataset file formats and pipeline orchestration for the
//! `loadcast` command-line tool.

pub mod config;
pub mod io;
pub mod pipeline;

pub use config::{ImputeMethod, NetworkConfig, PipelineConfig};
pub use pipeline::{run_pipeline, Stage};
