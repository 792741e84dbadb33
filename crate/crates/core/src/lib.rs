//! Foreground-union detection from self-supervised ViT patch features: an
//! ensemble of min-cut unit voters, a distilled per-patch head, and the
//! metrics and estimators used to analyze both.

pub mod analysis;
pub mod cli;
pub mod distill;
pub mod ensemble;
pub mod error;
pub mod maxflow;
pub mod synthetic;
pub mod tensor_io;
pub mod unit_voter;

pub use error::{Error, Result};
