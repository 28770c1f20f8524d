//! Detection and analysis of implicit mentoring in pull-request review
//! comments.

pub mod annotation;
pub mod classifier;
pub mod demography;
pub mod error;
pub mod ingestion;
pub mod metrics;
pub mod relations;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
