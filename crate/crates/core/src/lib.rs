pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod pipeline;
pub mod scoring;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
