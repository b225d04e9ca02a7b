//! The stability SDP
//!
//! ```text
//! min η   s.t.  −JᵀΦ − ΦJ + ηI ⪰ 0,   Φ − εI ⪰ 0,   I − Φ ⪰ 0
//! ```
//!
//! written in standard inequality form `min cᵀφ s.t. F(φ) = F0 + Σ φ_i F_i ⪰ 0`
//! with `φ = (η, svec(Φ))`, together with its primal-dual solver.

mod certificate;
mod ipm;
mod problem;

pub use certificate::{check_constraint, CertificateJson, SolverStatus, StabilityCertificate};
pub use ipm::{solve_sdp, solve_sdp_with, stability_index, Refine, SolveOptions, DEFAULT_TOL, MAX_ITERATIONS, MIN_TOL};
pub use problem::{build_sdp, raw_to_svec_coordinates, svec_to_raw_coordinates, BlockDiag, StabilitySDP, DEFAULT_EPS};
