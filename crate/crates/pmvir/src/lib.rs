//! File formats, dataset layout, configuration and command line around
//! [`pmvir_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod manifest;

pub use error::{Error, Result};
