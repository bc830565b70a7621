//! Numerics for exponential functionals of Brownian motion.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod identities;
pub mod pathsim;
pub mod quad;
pub mod samplers;
pub mod specfun;
pub mod stats;
