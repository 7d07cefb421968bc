//! Run configuration and file output for the `lsreinit` command-line driver.

pub mod config;
pub mod vtk;

pub use config::{parse_config, RunConfig, SchemeKind};
pub use vtk::{write_vtk, write_vtk_file, Snapshot};
