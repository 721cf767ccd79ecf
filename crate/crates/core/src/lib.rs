pub mod adapt;
pub mod cli;
pub mod data;
pub mod density;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod learners;
pub mod repro;
pub mod rng;
pub mod service;
pub mod synth;
pub mod stats;

pub use error::{Error, Result};
