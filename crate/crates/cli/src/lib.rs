//! Configuration-driven experiment runner for `cmg-core`: TOML run specs,
//! JSON game files, CSV artifacts and the `cmg` command line.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod gamefile;
pub mod runner;
pub mod verify;

pub use error::{CliError, Result};
