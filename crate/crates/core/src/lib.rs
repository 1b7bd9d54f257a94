//! Forecasting under temporal covariate shift: split the training history
//! into maximally diverse periods, then train a GRU whose per-step hidden
//! state distributions are matched across periods.

pub mod cli;
pub mod config;
pub mod dataio;
pub mod distances;
pub mod error;
pub mod metrics;
pub mod numgraph;
pub mod seqmodel;
pub mod tdc;
pub mod tdm;

pub use error::{Error, Result};
