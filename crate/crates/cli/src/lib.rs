//! HTTP service and command-line front end for the optimization engine.

pub mod config;
pub mod demo;
pub mod error;
pub mod report;
pub mod service;
pub mod simulate;

pub use config::ServiceConfig;
pub use error::CliError;
