pub mod datasets;
pub mod discrepancy;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod models;
pub mod nn;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
