pub mod am;
pub mod autograd;
pub mod cli;
pub mod config;
pub mod dsp;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod schedule;
pub mod score;
pub mod trainer;
pub mod voc;

pub use error::{Error, Result};
