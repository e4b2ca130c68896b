//! File formats, command line and HTTP session service around
//! [`cpr_core`].

pub mod chat;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod edgelist;
pub mod error;
pub mod names;
pub mod pipeline;
pub mod report;
pub mod service;

pub use cpr_core as core;
pub use error::{Error, Result};
