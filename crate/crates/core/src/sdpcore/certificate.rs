use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symkernel::{svec, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalTrouble,
}

/// Primal-dual solution of the stability SDP.
#[derive(Debug, Clone)]
pub struct StabilityCertificate {
    /// Stability index; negative iff the certificate proves asymptotic stability.
    pub eta: f64,
    pub phi: SymMatrix,
    /// Dual blocks `(Υ₁, Υ₂, Υ₃)` paired with the Lyapunov, lower-bound and
    /// upper-bound constraints.
    pub upsilon: [SymMatrix; 3],
    /// `Tr(F(φ) Υ)`.
    pub gap: f64,
    /// `max_i |Tr(F_i Υ) − c_i|`.
    pub dual_residual: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub solve_time: f64,
    pub eps: f64,
}

impl StabilityCertificate {
    pub fn n(&self) -> usize {
        self.phi.dim()
    }

    /// `η < 0`. For unstable systems `η` is positive and of order `ε`.
    pub fn stable(&self) -> bool {
        self.eta < 0.0
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// `(η, svec(Φ))`.
    pub fn primal_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(1 + svec(&self.phi).values().len());
        x.push(self.eta);
        x.extend_from_slice(svec(&self.phi).values());
        x
    }

    /// Concatenated `svec(Υ₁), svec(Υ₂), svec(Υ₃)`.
    pub fn dual_vector(&self) -> Vec<f64> {
        self.upsilon.iter().flat_map(|u| svec(u).into_values()).collect()
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            eta: self.eta,
            stable: self.stable(),
            phi_svec: svec(&self.phi).into_values(),
            upsilon_svec: self.upsilon.iter().map(|u| svec(u).into_values()).collect(),
            gap: self.gap,
            dual_residual: self.dual_residual,
            status: self.status,
            iterations: self.iterations,
            eps: self.eps,
            solve_time_s: self.solve_time,
        }
    }
}

/// Serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub eta: f64,
    pub stable: bool,
    pub phi_svec: Vec<f64>,
    pub upsilon_svec: Vec<Vec<f64>>,
    pub gap: f64,
    pub dual_residual: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub eps: f64,
    pub solve_time_s: f64,
}

/// Stability constraint `η < η̄`.
pub fn check_constraint(cert: &StabilityCertificate, eta_bar: f64) -> Result<bool> {
    if cert.status != SolverStatus::Optimal {
        return Err(Error::StatusNotOptimal(cert.status));
    }
    Ok(cert.eta < eta_bar)
}
