//! Sensitivity of the stability index by the implicit function theorem.
//!
//! At a primal-dual optimum `ψ* = (φ*, υ*)` the optimality function
//! `G(ψ, J)` vanishes. When its Jacobian `G′ = ∂G/∂ψ` is nonsingular,
//! `∂ψ*/∂J_ij = −G′⁻¹ ∂G/∂J_ij`, and `∂η/∂J_ij` is the first component.

mod kkt;
mod report;
mod sens;

pub use kkt::{assemble_dg_dj, assemble_g, assemble_gprime, KKTPoint};
pub use report::{SensMethod, SensitivityJson, SensitivityReport};
pub use sens::{
    sens_entry, sens_matrix, sens_params, sens_params_at, EntrySensitivity, KktSystem, DEGENERATE_COND, KKT_GATE,
};
