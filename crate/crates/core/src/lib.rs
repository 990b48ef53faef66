pub mod cli;
pub mod cnn;
pub mod error;
pub mod format;
pub mod fusion;
pub mod harness;
pub mod nn;
pub mod plot;
pub mod shape;
pub mod sketch;
pub mod synth;

pub use error::{Error, Result};
