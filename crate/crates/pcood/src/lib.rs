//! Std companion to `pcood-core`: PCOD tensor files, ASCII point cloud and
//! report formats, deterministic multi-threaded streaming, and the `pcood`
//! command line.

pub mod cli;
mod error;
pub mod output;
pub mod parallel;
pub mod pcod;
pub mod pipeline;
pub mod text;

pub use error::{Error, Result};
