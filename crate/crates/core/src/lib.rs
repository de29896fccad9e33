//! Order-preserving Bayesian optimization.
//!
//! The surrogate in [`surrogate_op`] is trained to reproduce the *order* of
//! observed objective values through a Plackett–Luce listwise likelihood,
//! rather than regressing the values themselves. It plugs into a standard BO
//! loop, a good-enough batch loop and a single trust-region loop
//! ([`optimizer`]), alongside a GP baseline ([`surrogate_gp`]) and an
//! MSE-trained network baseline ([`surrogate_nn`]).

pub mod acquisition;
pub mod benchfn;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod rng;
pub mod sampling;
pub mod surrogate_gp;
pub mod surrogate_nn;
pub mod surrogate_op;

pub use dataset::Dataset;
pub use error::{Error, Result};
