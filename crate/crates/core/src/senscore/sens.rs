use std::time::Instant;

use nalgebra::{DMatrix, DVector, SVD};

use super::kkt::{assemble_dg_dj, assemble_g, assemble_gprime, KKTPoint};
use super::report::{SensMethod, SensitivityReport};
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::sdpcore::{SolverStatus, StabilityCertificate};
use crate::symkernel::{smat_dense, svec_len};
use crate::sysmodel::ParametricJacobian;

/// Largest `‖G(ψ)‖_∞` accepted as an optimum.
pub const KKT_GATE: f64 = 1e-6;
/// `G′` with a larger condition estimate is treated as singular.
pub const DEGENERATE_COND: f64 = 1e12;
/// Singular values below this fraction of the largest are dropped in the
/// least-squares fallback.
const PINV_RTOL: f64 = 1e-12;

enum Factor {
    Lu(Lu),
    Pinv(SVD<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// `G′` at a verified optimum, factored once for any number of solves.
pub struct KktSystem {
    pub point: KKTPoint,
    pub cond_estimate: f64,
    pub degenerate: bool,
    factor: Factor,
}

impl KktSystem {
    /// Checks the certificate status and the optimality gate, then factors `G′`.
    pub fn new(cert: &StabilityCertificate, j: &DMatrix<f64>) -> Result<KktSystem> {
        if cert.status != SolverStatus::Optimal {
            return Err(Error::StatusNotOptimal(cert.status));
        }
        let point = KKTPoint::from_certificate(cert, j)?;
        let residual = assemble_g(&point)?.amax();
        if !(residual <= KKT_GATE) {
            return Err(Error::NotAtOptimum {
                residual,
                gate: KKT_GATE,
            });
        }
        let gp = assemble_gprime(&point)?;
        let lu = Lu::factor(&gp);
        let cond_estimate = lu.cond_estimate();
        if cond_estimate <= DEGENERATE_COND {
            return Ok(KktSystem {
                point,
                cond_estimate,
                degenerate: false,
                factor: Factor::Lu(lu),
            });
        }
        let svd = SVD::try_new(gp, true, true, f64::EPSILON, 0).ok_or(Error::DegenerateKkt)?;
        Ok(KktSystem {
            point,
            cond_estimate,
            degenerate: true,
            factor: Factor::Pinv(svd),
        })
    }

    /// Solves `G′ x = b`, in the least-squares minimum-norm sense when degenerate.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = match &self.factor {
            Factor::Lu(lu) => lu.solve(b),
            Factor::Pinv(svd) => pinv_apply(svd, b, false),
        };
        finite(x)
    }

    /// Solves `G′ᵀ x = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = match &self.factor {
            Factor::Lu(lu) => lu.solve_transpose(b),
            Factor::Pinv(svd) => pinv_apply(svd, b, true),
        };
        finite(x)
    }

    /// `∂ψ/∂J_ij = −G′⁻¹ ∂G/∂J_ij`.
    pub fn dpsi_dj(&self, i: usize, j: usize) -> Result<DVector<f64>> {
        let rhs = -assemble_dg_dj(&self.point, i, j)?;
        self.solve(&rhs)
    }

    /// All `∂η/∂J_ij` from one adjoint solve `G′ᵀλ = e₀`:
    /// `∂η/∂J_ij = −λᵀ ∂G/∂J_ij = 2 (Λ₁Υ₁ + ΦQ)_ij` with `Λ₁ = smat(λ_φ)`,
    /// `Λ₂ = smat(λ_{Υ₁})` and `Q = ½(Λ₂Υ₁ + Υ₁Λ₂)`.
    pub fn eta_gradient(&self) -> Result<DMatrix<f64>> {
        let pt = &self.point;
        let n = pt.n();
        let m = pt.m();
        let len = svec_len(n);
        let mut e0 = DVector::zeros(pt.len());
        e0[0] = 1.0;
        let lambda = self.solve_transpose(&e0)?;
        let l1 = smat_dense(&lambda.as_slice()[1..m], n);
        let l2 = smat_dense(&lambda.as_slice()[m..m + len], n);
        let y1 = smat_dense(&pt.upsilon.as_slice()[..len], n);
        let phi = smat_dense(&pt.phi.as_slice()[1..], n);
        let q = (&l2 * &y1 + &y1 * &l2) * 0.5;
        let grad = (l1 * &y1 + phi * q) * 2.0;
        finite_matrix(grad)
    }
}

fn pinv_apply(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &DVector<f64>, transpose: bool) -> DVector<f64> {
    let (u, vt) = (
        svd.u.as_ref().expect("u computed"),
        svd.v_t.as_ref().expect("v_t computed"),
    );
    let sigma = &svd.singular_values;
    let cutoff = sigma.max() * PINV_RTOL;
    // G′ = U Σ Vᵀ, so G′⁺ = V Σ⁺ Uᵀ and (G′ᵀ)⁺ = U Σ⁺ Vᵀ.
    let mut coef = if transpose { vt * b } else { u.tr_mul(b) };
    for (c, s) in coef.iter_mut().zip(sigma.iter()) {
        *c = if *s > cutoff { *c / s } else { 0.0 };
    }
    if transpose {
        u * coef
    } else {
        vt.tr_mul(&coef)
    }
}

fn finite(x: DVector<f64>) -> Result<DVector<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::DegenerateKkt)
    }
}

fn finite_matrix(x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::DegenerateKkt)
    }
}

/// `∂η/∂J_ij` for one entry, with the full `∂ψ/∂J_ij`.
#[derive(Debug, Clone)]
pub struct EntrySensitivity {
    pub value: f64,
    pub dpsi: DVector<f64>,
    pub degenerate: bool,
    pub cond_estimate: f64,
}

pub fn sens_entry(cert: &StabilityCertificate, j: &DMatrix<f64>, row: usize, col: usize) -> Result<EntrySensitivity> {
    let sys = KktSystem::new(cert, j)?;
    let dpsi = sys.dpsi_dj(row, col)?;
    Ok(EntrySensitivity {
        value: dpsi[0],
        dpsi,
        degenerate: sys.degenerate,
        cond_estimate: sys.cond_estimate,
    })
}

/// All `∂η/∂J_ij`, from a single factorization of `G′`.
pub fn sens_matrix(cert: &StabilityCertificate, j: &DMatrix<f64>) -> Result<SensitivityReport> {
    let start = Instant::now();
    let sys = KktSystem::new(cert, j)?;
    let grad = sys.eta_gradient()?;
    Ok(SensitivityReport {
        method: SensMethod::Analytic,
        d_eta_d_j: Some(grad),
        d_eta_d_params: None,
        degenerate: sys.degenerate,
        cond_estimate: Some(sys.cond_estimate),
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Chain rule `∂η/∂d_k = Σ_ij (∂η/∂J_ij) (M_k)_ij` at the family's current
/// parameters; `cert` must be the solve at `J(d)`.
pub fn sens_params(cert: &StabilityCertificate, pj: &ParametricJacobian) -> Result<SensitivityReport> {
    sens_params_at(cert, pj, pj.current())
}

/// [`sens_params`] at an explicit parameter vector `d`.
pub fn sens_params_at(cert: &StabilityCertificate, pj: &ParametricJacobian, d: &[f64]) -> Result<SensitivityReport> {
    let start = Instant::now();
    let j = pj.jacobian_at(d)?;
    let mut report = sens_matrix(cert, &j)?;
    let grad = report.d_eta_d_j.as_ref().expect("sens_matrix fills d_eta_d_j");
    let params = pj
        .modes()
        .iter()
        .map(|mode| (mode.name.clone(), grad.component_mul(&mode.m).sum()))
        .collect();
    report.d_eta_d_params = Some(params);
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sdpcore::{build_sdp, solve_sdp_with, stability_index, SolveOptions};
    use crate::sysmodel::Mode;

    fn oscillatory(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let mut j = (&r - r.transpose()) * 3.0;
        for i in 0..n {
            j[(i, i)] -= 0.2 + rng.random::<f64>();
        }
        j
    }

    fn solve(j: &DMatrix<f64>) -> StabilityCertificate {
        solve_sdp_with(&build_sdp(j, 1e-6).unwrap(), &SolveOptions::high_accuracy()).unwrap()
    }

    /// `η = −1/λ_max(P)` with `JᵀP + PJ = −I`, differentiated through the
    /// Lyapunov equation with full n² vectorization.
    fn closed_form_gradient(j: &DMatrix<f64>) -> DMatrix<f64> {
        let n = j.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let jt = j.transpose();
        let op = id.kronecker(&jt) + jt.kronecker(&id);
        let lu = op.lu();
        let lyap = |rhs: &DMatrix<f64>| {
            let v = lu.solve(&DVector::from_column_slice(rhs.as_slice())).unwrap();
            DMatrix::from_column_slice(n, n, v.as_slice())
        };
        let p = lyap(&(-&id));
        let eig = p.clone().symmetric_eigen();
        let k = eig.eigenvalues.imax();
        let lmax = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k).clone_owned();
        DMatrix::from_fn(n, n, |a, b| {
            let mut dj = DMatrix::zeros(n, n);
            dj[(a, b)] = 1.0;
            let dp = lyap(&(-(dj.transpose() * &p + &p * &dj)));
            (v.transpose() * dp * &v)[0] / (lmax * lmax)
        })
    }

    #[test]
    fn scalar_derivative_is_two() {
        let j = DMatrix::from_element(1, 1, -1.0);
        let cert = stability_index(&j, 1e-6, 1e-8).unwrap();
        let e = sens_entry(&cert, &j, 0, 0).unwrap();
        assert!((e.value - 2.0).abs() < 1e-6, "{}", e.value);
        assert!(!e.degenerate);
        let m = sens_matrix(&cert, &j).unwrap();
        assert!((m.d_eta_d_j.unwrap()[(0, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_chain_rule() {
        let pj = ParametricJacobian::new(
            DMatrix::from_element(1, 1, -1.0),
            vec![Mode {
                name: "k".into(),
                m: DMatrix::from_element(1, 1, 1.0),
                lo: 0.0,
                hi: 0.0,
            }],
        )
        .unwrap();
        let j = pj.jacobian_at(pj.current()).unwrap();
        let cert = stability_index(&j, 1e-6, 1e-8).unwrap();
        let r = sens_params(&cert, &pj).unwrap();
        let p = r.d_eta_d_params.unwrap();
        assert_eq!(p[0].0, "k");
        assert!((p[0].1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn matches_closed_form_on_oscillatory_systems() {
        for (n, seed) in [(3, 1), (5, 2), (5, 3), (8, 4)] {
            let j = oscillatory(n, seed);
            let cert = solve(&j);
            let r = sens_matrix(&cert, &j).unwrap();
            assert!(!r.degenerate, "n={n} seed={seed} cond={:?}", r.cond_estimate);
            let want = closed_form_gradient(&j);
            let got = r.d_eta_d_j.unwrap();
            let err = (&got - &want).amax() / want.amax().max(1.0);
            assert!(err < 1e-6, "n={n} seed={seed}: {err:e}");
        }
    }

    #[test]
    fn matrix_agrees_with_entrywise_solves() {
        let j = oscillatory(4, 7);
        let cert = solve(&j);
        let grad = sens_matrix(&cert, &j).unwrap().d_eta_d_j.unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let e = sens_entry(&cert, &j, a, b).unwrap().value;
                assert!(
                    (e - grad[(a, b)]).abs() <= 1e-12 * grad.amax().max(1.0),
                    "({a},{b}) {e} {}",
                    grad[(a, b)]
                );
            }
        }
    }

    #[test]
    fn ift_solve_is_linear_in_the_right_hand_side() {
        let j = oscillatory(4, 11);
        let cert = solve(&j);
        let sys = KktSystem::new(&cert, &j).unwrap();
        let r1 = assemble_dg_dj(&sys.point, 0, 1).unwrap();
        let r2 = assemble_dg_dj(&sys.point, 2, 3).unwrap();
        let combined = sys.solve(&(&r1 * 2.0 - &r2 * 0.5)).unwrap();
        let split = sys.solve(&r1).unwrap() * 2.0 - sys.solve(&r2).unwrap() * 0.5;
        assert!((combined - &split).amax() <= 1e-10 * split.amax().max(1.0));
    }

    #[test]
    fn chain_rule_contracts_the_gradient() {
        let j0 = oscillatory(5, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let modes: Vec<Mode> = (0..2)
            .map(|k| Mode {
                name: format!("p{k}"),
                m: DMatrix::from_fn(5, 5, |_, _| rng.random_range(-0.1..0.1)),
                lo: -0.2,
                hi: 0.2,
            })
            .collect();
        let mut pj = ParametricJacobian::new(j0, modes).unwrap();
        pj.set_current(&[0.1, -0.05]).unwrap();
        let j = pj.jacobian_at(pj.current()).unwrap();
        let cert = solve(&j);
        let report = sens_params(&cert, &pj).unwrap();
        let grad = report.d_eta_d_j.as_ref().unwrap();
        for (k, (_, v)) in report.d_eta_d_params.as_ref().unwrap().iter().enumerate() {
            let want: f64 = grad.iter().zip(pj.modes()[k].m.iter()).map(|(a, b)| a * b).sum();
            assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn gates_reject_bad_certificates() {
        let j = oscillatory(3, 5);
        let mut cert = solve(&j);
        cert.status = SolverStatus::MaxIterations;
        assert!(matches!(sens_entry(&cert, &j, 0, 0), Err(Error::StatusNotOptimal(_))));

        let mut cert = solve(&j);
        cert.eta += 1e-3;
        assert!(matches!(sens_matrix(&cert, &j), Err(Error::NotAtOptimum { .. })));
    }

    #[test]
    fn repeated_eigenvalue_is_flagged() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0]));
        let cert = solve(&j);
        let r = sens_matrix(&cert, &j).unwrap();
        assert!(r.degenerate);
        assert!(r.d_eta_d_j.unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn diagonal_system() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let cert = solve(&j);
        let r = sens_matrix(&cert, &j).unwrap();
        // Φ is not unique here, so G′ is singular, but the minimum-norm
        // solve still recovers the derivative of the active eigenvalue.
        assert!(r.degenerate);
        let g = r.d_eta_d_j.unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-6);
        assert!(g[(1, 1)].abs() < 1e-6);
    }
}
