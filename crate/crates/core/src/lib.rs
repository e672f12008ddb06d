//! Bayesian generation of phase-consistent synthetic unbalanced distribution
//! feeders with reliability indices and Carson line impedances.

pub mod bdgd;
pub mod carson;
pub mod config;
pub mod data;
pub mod demo;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod line;
pub mod load;
pub mod model;
pub mod opendss;
pub mod phase;
pub mod pipeline;
pub mod powerflow;
pub mod reliability;
pub mod sample;
pub mod topology;
pub mod validate;

pub use error::{Error, Result};
