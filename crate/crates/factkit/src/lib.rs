//! File formats, the HTTP embedding client and the `factkit` command-line
//! tool built on `factkit-core`.

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod embfile;
pub mod error;
pub mod facts;
pub mod manifest;
pub mod provider;
pub mod report;
pub mod splitfile;

pub use error::{Error, Result};
