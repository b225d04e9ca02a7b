//! Finite-difference sensitivities of `η`: the forward-difference
//! perturbation baseline and the central-difference oracle.
//!
//! Every evaluation point is a fresh SDP solve; the number of solves and
//! their wall-clock times are reported with each estimate.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdpcore::{build_sdp, solve_sdp_with, Refine, SolveOptions, SolverStatus, MIN_TOL};
use crate::senscore::{SensMethod, SensitivityReport};
use crate::sysmodel::ParametricJacobian;

pub const DEFAULT_FD_STEPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Step of the central-difference oracle, relative to `max(1, |value|)`.
pub const ORACLE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    Forward,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDConfig {
    pub eps_p: f64,
    pub scheme: FdScheme,
    /// Scale the step by `max(1, |value|)` of the perturbed quantity.
    pub relative_step: bool,
    pub refine: Refine,
}

impl FDConfig {
    pub fn forward(eps_p: f64) -> FDConfig {
        FDConfig {
            eps_p,
            scheme: FdScheme::Forward,
            relative_step: false,
            refine: Refine::OnStall,
        }
    }

    pub fn central(eps_p: f64) -> FDConfig {
        FDConfig {
            scheme: FdScheme::Central,
            ..FDConfig::forward(eps_p)
        }
    }

    /// Central differences with a tiny relative step. The truncation error
    /// is then negligible and the result is limited only by how accurately
    /// `η` is solved, so every solve is refined; pair it with `MIN_TOL`.
    pub fn oracle() -> FDConfig {
        FDConfig {
            eps_p: ORACLE_STEP,
            scheme: FdScheme::Central,
            relative_step: true,
            refine: Refine::Always,
        }
    }

    pub fn method(&self) -> SensMethod {
        match self.scheme {
            FdScheme::Forward => SensMethod::ForwardFd,
            FdScheme::Central => SensMethod::CentralFd,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_p > 0.0) || !self.eps_p.is_finite() {
            return Err(Error::Config(format!(
                "eps_p must be positive and finite, got {}",
                self.eps_p
            )));
        }
        Ok(())
    }

    fn step(&self, value: f64) -> f64 {
        if self.relative_step {
            self.eps_p * value.abs().max(1.0)
        } else {
            self.eps_p
        }
    }
}

/// One finite-difference quotient with its solve bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate {
    pub value: f64,
    pub solves: usize,
    pub solve_times: Vec<f64>,
}

/// `η` at `j`, refusing anything short of an Optimal solve.
pub fn eta_at(j: &DMatrix<f64>, eps: f64, opts: &SolveOptions) -> Result<(f64, f64)> {
    let start = Instant::now();
    let cert = solve_sdp_with(&build_sdp(j, eps)?, opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    if cert.status != SolverStatus::Optimal {
        return Err(Error::Solver(format!(
            "finite-difference solve ended with status {:?} (gap {:.2e}, dual residual {:.2e})",
            cert.status, cert.gap, cert.dual_residual
        )));
    }
    Ok((cert.eta, elapsed))
}

fn options(cfg: &FDConfig, tol: f64) -> SolveOptions {
    SolveOptions {
        tol: tol.max(MIN_TOL),
        refine: cfg.refine,
    }
}

/// Difference quotient of `η(J(x))` along one coordinate `x` with base value
/// `x0`. `base` is a known `η` at `x0`, used by the forward scheme.
fn quotient<F>(jac: F, x0: f64, base: Option<f64>, cfg: &FDConfig, eps: f64, tol: f64) -> Result<FdEstimate>
where
    F: Fn(f64) -> Result<DMatrix<f64>>,
{
    cfg.validate()?;
    let opts = options(cfg, tol);
    let h = cfg.step(x0);
    let mut times = Vec::with_capacity(2);
    let mut eval = |x: f64| -> Result<f64> {
        let (eta, t) = eta_at(&jac(x)?, eps, &opts)?;
        times.push(t);
        Ok(eta)
    };
    let value = match cfg.scheme {
        FdScheme::Forward => {
            let lo = match base {
                Some(eta) => eta,
                None => eval(x0)?,
            };
            (eval(x0 + h)? - lo) / h
        }
        FdScheme::Central => (eval(x0 + h)? - eval(x0 - h)?) / (2.0 * h),
    };
    Ok(FdEstimate {
        value,
        solves: times.len(),
        solve_times: times,
    })
}

/// `∂η/∂d_k` at `d` by perturbing `d_k` alone.
pub fn fd_sens_param(
    pj: &ParametricJacobian,
    d: &[f64],
    k: usize,
    cfg: &FDConfig,
    eps: f64,
    tol: f64,
) -> Result<FdEstimate> {
    let m = pj.djacobian(k)?.clone();
    let j0 = pj.jacobian_at(d)?;
    let dk = d[k];
    quotient(|x| Ok(&j0 + &m * (x - dk)), dk, None, cfg, eps, tol)
}

/// `∂η/∂J_ij` (0-based) by perturbing the single entry.
pub fn fd_sens_entry(
    j: &DMatrix<f64>,
    row: usize,
    col: usize,
    cfg: &FDConfig,
    eps: f64,
    tol: f64,
) -> Result<FdEstimate> {
    check_entry(j, row, col)?;
    quotient(
        |x| {
            let mut jp = j.clone();
            jp[(row, col)] = x;
            Ok(jp)
        },
        j[(row, col)],
        None,
        cfg,
        eps,
        tol,
    )
}

fn check_entry(j: &DMatrix<f64>, row: usize, col: usize) -> Result<()> {
    if !j.is_square() || row >= j.nrows() || col >= j.ncols() {
        return Err(Error::Dimension(format!(
            "entry ({row}, {col}) outside a {}x{} Jacobian",
            j.nrows(),
            j.ncols()
        )));
    }
    Ok(())
}

/// The full `∂η/∂d` at `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub values: Vec<f64>,
    /// SDP solves performed: `p + 1` for forward differences (one shared
    /// base solve, or `p` when `base` was supplied), `2p` for central.
    pub solves: usize,
    pub solve_time: f64,
}

/// All parameter derivatives at `d`. For the forward scheme the base solve
/// is shared across parameters; pass `base_eta` to reuse one already done.
pub fn fd_gradient(
    pj: &ParametricJacobian,
    d: &[f64],
    cfg: &FDConfig,
    eps: f64,
    tol: f64,
    base_eta: Option<f64>,
) -> Result<FdGradient> {
    cfg.validate()?;
    let j0 = pj.jacobian_at(d)?;
    let mut solves = 0;
    let mut solve_time = 0.0;
    let base = match (cfg.scheme, base_eta) {
        (FdScheme::Forward, None) => {
            let (eta, t) = eta_at(&j0, eps, &options(cfg, tol))?;
            solves += 1;
            solve_time += t;
            Some(eta)
        }
        (_, b) => b,
    };
    let mut values = Vec::with_capacity(pj.n_params());
    for (k, mode) in pj.modes().iter().enumerate() {
        let dk = d[k];
        let est = quotient(|x| Ok(&j0 + &mode.m * (x - dk)), dk, base, cfg, eps, tol)?;
        solves += est.solves;
        solve_time += est.solve_times.iter().sum::<f64>();
        values.push(est.value);
    }
    Ok(FdGradient {
        values,
        solves,
        solve_time,
    })
}

/// Finite-difference counterpart of `sens_params`, at the family's current
/// parameters.
pub fn fd_sens_params(pj: &ParametricJacobian, cfg: &FDConfig, eps: f64, tol: f64) -> Result<SensitivityReport> {
    let start = Instant::now();
    let grad = fd_gradient(pj, pj.current(), cfg, eps, tol, None)?;
    Ok(SensitivityReport {
        method: cfg.method(),
        d_eta_d_j: None,
        d_eta_d_params: Some(pj.names().into_iter().zip(grad.values).collect()),
        degenerate: false,
        cond_estimate: None,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Finite-difference counterpart of `sens_matrix`: `n² (+1)` or `2n²` solves.
pub fn fd_sens_matrix(j: &DMatrix<f64>, cfg: &FDConfig, eps: f64, tol: f64) -> Result<SensitivityReport> {
    cfg.validate()?;
    check_entry(j, 0, 0)?;
    let start = Instant::now();
    let n = j.nrows();
    let base = match cfg.scheme {
        FdScheme::Forward => Some(eta_at(j, eps, &options(cfg, tol))?.0),
        FdScheme::Central => None,
    };
    let mut grad = DMatrix::zeros(n, n);
    for row in 0..n {
        for col in 0..n {
            let est = quotient(
                |x| {
                    let mut jp = j.clone();
                    jp[(row, col)] = x;
                    Ok(jp)
                },
                j[(row, col)],
                base,
                cfg,
                eps,
                tol,
            )?;
            grad[(row, col)] = est.value;
        }
    }
    Ok(SensitivityReport {
        method: cfg.method(),
        d_eta_d_j: Some(grad),
        d_eta_d_params: None,
        degenerate: false,
        cond_estimate: None,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
