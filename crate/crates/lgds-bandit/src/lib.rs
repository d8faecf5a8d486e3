//! Simulation library and benchmark harness for a linear bandit whose
//! reward sequence is generated by a known linear Gaussian dynamical
//! system, together with the Kalman-filter policies that exploit it.

pub mod analysis;
pub mod environment;
pub mod error;
pub mod filtering;
pub mod harness;
pub mod numerics;
pub mod policies;
pub mod rng;

pub use error::{Error, Result};
