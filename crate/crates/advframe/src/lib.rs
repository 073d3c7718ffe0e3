//! File formats, checkpoints, configuration, the experiment harness and the
//! command-line front end for the `advframe_core` frame parser.

pub mod checkpoint;
pub mod cli;
pub mod clusters;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
