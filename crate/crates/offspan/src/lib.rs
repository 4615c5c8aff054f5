// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats, experiment orchestration and the `offspan` command line on
//! top of `offspan-core`.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod html;
pub mod report;

pub use error::{Error, Result};
