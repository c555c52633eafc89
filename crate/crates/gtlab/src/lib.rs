//! Command-line experiments, file formats and parallel execution on top of
//! [`gtlab_core`].

pub mod cli;
pub mod config;
pub mod format;
pub mod runner;
pub mod verify;
