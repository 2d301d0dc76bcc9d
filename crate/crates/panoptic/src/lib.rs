//! File formats, parallel dataset evaluation and the `panoptic` command line
//! on top of [`panoptic_core`].

pub mod cli;
pub mod codec;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
pub use panoptic_core as core;
