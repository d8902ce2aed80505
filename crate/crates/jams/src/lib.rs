//! Command-line tool, file formats and benchmark harness for the jumping
//! adaptive multimodal sampler in [`jams_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod formats;
pub mod pipeline;

pub use error::CliError;
pub use jams_core;
