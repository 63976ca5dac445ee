//! Files, threads and the command line around [`winkler_core`].

pub mod cli;
pub mod error;
pub mod format;
pub mod manifest;
pub mod parallel;
pub mod run;

pub use error::{Error, Result};
