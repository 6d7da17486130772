//! Configuration, workflows and file output for the `paraxial` binary.

pub mod config;
pub mod output;
pub mod workflows;
