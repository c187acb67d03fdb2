//! Pipelines, presets and acceptance checks behind the `cloudhodge` binary.

pub mod checks;
pub mod config;
pub mod pipeline;
pub mod presets;
