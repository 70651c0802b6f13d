//! File formats, configuration and parallel drivers around [`fdrlab_core`].

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::RunConfig;
pub use error::AppError;
pub use run::{execute, Runner};
