//! Lyapunov-SDP small-signal stability index and its analytic first-order
//! sensitivity.
//!
//! The stability index `η` of a linearized system `ẋ = Jx` is the optimal
//! value of a semidefinite program built on the Lyapunov inequality. Its
//! derivative with respect to the Jacobian entries (and, by the chain rule,
//! to any parameters the Jacobian depends on) is obtained from the
//! primal-dual optimum alone by differentiating the optimality conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fdbase;
pub mod io;
pub mod linalg;
pub mod sdpcore;
pub mod senscore;
pub mod symkernel;
pub mod sysmodel;

pub use error::{Error, Result};
