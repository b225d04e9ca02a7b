use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensMethod {
    Analytic,
    ForwardFd,
    CentralFd,
}

/// Sensitivities of `η`, with respect to the Jacobian entries and/or the
/// parameters of an affine family.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub method: SensMethod,
    pub d_eta_d_j: Option<DMatrix<f64>>,
    /// `(name, ∂η/∂d_k)` in parameter order.
    pub d_eta_d_params: Option<Vec<(String, f64)>>,
    /// `G′` was too ill-conditioned for a plain solve; the values are
    /// minimum-norm least-squares solutions.
    pub degenerate: bool,
    /// One-norm condition estimate of `G′`; `None` for finite differences.
    pub cond_estimate: Option<f64>,
    /// Wall-clock seconds spent on the sensitivity, including any solves.
    pub elapsed: f64,
}

impl SensitivityReport {
    pub fn param_values(&self) -> Option<Vec<f64>> {
        self.d_eta_d_params
            .as_ref()
            .map(|p| p.iter().map(|(_, v)| *v).collect())
    }

    pub fn to_json(&self) -> SensitivityJson {
        SensitivityJson {
            method: self.method,
            d_eta_d_j: self
                .d_eta_d_j
                .as_ref()
                .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect()),
            d_eta_d_params: self.d_eta_d_params.as_ref().map(|p| p.iter().cloned().collect()),
            degenerate: self.degenerate,
            cond_estimate: self.cond_estimate.filter(|c| c.is_finite()),
            elapsed_s: self.elapsed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityJson {
    pub method: SensMethod,
    #[serde(rename = "d_eta_d_J", skip_serializing_if = "Option::is_none", default)]
    pub d_eta_d_j: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d_eta_d_params: Option<BTreeMap<String, f64>>,
    pub degenerate: bool,
    pub cond_estimate: Option<f64>,
    pub elapsed_s: f64,
}
