//! Respondent-driven sampling as a Markov process on a referral tree, with
//! feasible GLS estimators of population means.

pub mod covariance;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod format;
pub mod io;
mod linalg;
pub mod netmodel;
pub mod referral;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
