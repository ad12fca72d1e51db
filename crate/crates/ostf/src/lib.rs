//! IO, parallel drivers and the command line for `ostf-core`.

pub mod cli;
mod error;
pub mod io;
pub mod runner;
pub mod synth;

pub use error::{Error, Result};
pub use ostf_core as core;
