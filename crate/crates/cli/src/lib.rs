//! Configuration, persistence and command workflows around the gait core.

pub mod checks;
pub mod config;
pub mod error;
pub mod export;
pub mod gait_file;
pub mod optimize;
pub mod parallel;
pub mod simulate;
pub mod svg;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use gait_file::GaitFile;
