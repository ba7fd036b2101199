//! Conjectural-variations pricing equilibria and the switchback learning
//! dynamics that select them.
//!
//! - [`demand`]: linear and multinomial-logit demand on a price box, noise.
//! - [`design`]: joint experiment laws and the conjectures they induce.
//! - [`equilibrium`]: CV fixed points, Jacobians, contraction checks, GMV.
//! - [`sldl`]: batched two-point experimentation and damped reoptimization.
//! - [`harness`]: replications, rate fits, correlation sweeps.
//! - [`plan`], [`cli`], [`io`]: plan files, command line, artifacts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod demand;
pub mod design;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod plan;
pub mod sldl;

pub use error::{Error, Result};

/// Random number generator used for every simulated draw.
pub type SimRng = rand_chacha::ChaCha8Rng;
