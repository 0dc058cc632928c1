//! Controlled optimisation of quadratic objectives.
//!
//! The crate studies `f(x) = ½⟨x, Ax⟩ + ⟨b, x⟩ + c` through the controlled
//! gradient flow `ẋ = −Ax + Bu − b`:
//!
//! * [`controllability`]: Kalman rank test for the flow and its Newton variant,
//! * [`flow`]: RK4 and closed-form trajectories, Gramian steering,
//! * [`descent`]: explicit-Euler controlled gradient descent with feedback design,
//! * [`prox`]: the controlled proximity operator and implicit-Euler resolvent,
//! * [`cs`]: a Gaussian compressed-sensing benchmark,
//! * [`cli`]: the `ctrlgrad` command line front end.

// NaN-rejecting guards read as `!(x > 0.0)`; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod controllability;
pub mod cs;
pub mod descent;
pub mod error;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod prox;
pub mod quadratic;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use linalg::Matrix;
