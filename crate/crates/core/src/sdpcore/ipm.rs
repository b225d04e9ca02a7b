//! Dense primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) specialized to the three-block stability SDP.
//!
//! The primal iterate is kept exactly feasible: it starts at a strictly
//! feasible point and `S = F(φ)` is recomputed from `φ` every iteration, so
//! only the dual equality residual has to be driven to zero. Each iteration
//! forms the Schur complement `M_ij = Tr(F_i S⁻¹ F_j Z)` blockwise as
//! `𝓕ᵀ (S⁻¹ ⊛ Z) 𝓕`, using that the bound blocks of `𝓕` are `±[0 | I]`.
//!
//! The Schur complement's condition number grows like `μ⁻²`, which caps the
//! attainable accuracy somewhere around a gap of `1e-9`. Past that point the
//! iterate can be refined by Newton's method on the symmetrized optimality
//! conditions `𝓕ᵀ svec(Z) = c`, `½(SZ + ZS) = 0`, whose Jacobian stays
//! nonsingular at a nondegenerate, strictly complementary optimum.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::certificate::{SolverStatus, StabilityCertificate};
use super::problem::{build_sdp, BlockDiag, StabilitySDP};
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::symkernel::{smat_dense, svec_dense, sym_kron_unchecked, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const MIN_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.98;
const REFINE_STEPS: usize = 4;
const REFINE_MIN_RCOND: f64 = 1e-14;
/// Refinement stops once the optimality residual is this small.
const REFINE_TARGET: f64 = 1e-13;
const REFINE_BACKTRACKS: usize = 12;
/// Cone excursion tolerated in a refined point, the same slack the
/// certificate invariants allow.
const REFINE_CONE_SLACK: f64 = 1e-7;

type Chol = Cholesky<f64, Dyn>;

/// When to run Newton refinement on the final interior-point iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refine {
    /// Only when the interior-point loop stalls short of the tolerance.
    #[default]
    OnStall,
    /// Always. Use this when `η` has to be accurate well below `tol`, as in
    /// small-step finite differences.
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub refine: Refine,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            refine: Refine::OnStall,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> SolveOptions {
        SolveOptions {
            tol,
            ..SolveOptions::default()
        }
    }

    /// Interior-point tolerance `tol` followed by unconditional refinement,
    /// which brings the optimality residual far below `tol` when the
    /// optimum is nondegenerate. Sensitivities need this: the
    /// complementarity residual of a plain interior-point solve scales like
    /// the square root of its gap.
    pub fn refined(tol: f64) -> SolveOptions {
        SolveOptions {
            tol,
            refine: Refine::Always,
        }
    }

    /// Tightest tolerance plus unconditional refinement.
    pub fn high_accuracy() -> SolveOptions {
        SolveOptions {
            tol: MIN_TOL,
            refine: Refine::Always,
        }
    }
}

/// `build_sdp` followed by `solve_sdp`.
pub fn stability_index(j: &DMatrix<f64>, eps: f64, tol: f64) -> Result<StabilityCertificate> {
    solve_sdp(&build_sdp(j, eps)?, tol)
}

/// Solves the stability SDP to primal-dual optimality.
///
/// Non-convergence is not an error: the best iterate is returned with
/// status `MaxIterations` or `NumericalTrouble`.
pub fn solve_sdp(sdp: &StabilitySDP, tol: f64) -> Result<StabilityCertificate> {
    solve_sdp_with(sdp, &SolveOptions::with_tol(tol))
}

pub fn solve_sdp_with(sdp: &StabilitySDP, opts: &SolveOptions) -> Result<StabilityCertificate> {
    let tol = opts.tol;
    if !(tol >= MIN_TOL) {
        return Err(Error::Config(format!("tol must be at least {MIN_TOL:e}, got {tol:e}")));
    }
    let start = Instant::now();
    let n = sdp.n;

    let (mut x, mut z, mut status, iterations) = interior_point(sdp, tol);
    let refine = match opts.refine {
        Refine::Always => true,
        Refine::OnStall => status != SolverStatus::Optimal,
        Refine::Never => false,
    };
    if refine {
        if let Some((xr, zr)) = newton_refine(sdp, &x, &z) {
            x = xr;
            z = zr;
        }
    }
    if status != SolverStatus::Optimal && (&sdp.c - sdp.adjoint(&z)).amax() > tol {
        if let Some(zp) = project_dual(sdp, &z) {
            z = zp;
        }
    }

    let s = sdp.eval(&x);
    let gap = s.trace_product(&z);
    let dual_residual = (&sdp.c - sdp.adjoint(&z)).amax();
    if gap.abs() <= tol && dual_residual <= tol {
        status = SolverStatus::Optimal;
    }
    let phi = smat_dense(&x[1..], n);
    Ok(StabilityCertificate {
        eta: x[0],
        phi: SymMatrix::from_upper(&phi)?,
        upsilon: [
            SymMatrix::from_upper(&z.blocks[0])?,
            SymMatrix::from_upper(&z.blocks[1])?,
            SymMatrix::from_upper(&z.blocks[2])?,
        ],
        gap,
        dual_residual,
        status,
        iterations,
        solve_time: start.elapsed().as_secs_f64(),
        eps: sdp.eps,
    })
}

fn interior_point(sdp: &StabilitySDP, tol: f64) -> (Vec<f64>, BlockDiag, SolverStatus, usize) {
    let n = sdp.n;
    let nu = (3 * n) as f64;
    let mut x = sdp.interior_point();
    let mut z = BlockDiag {
        blocks: [
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
        ],
    };
    let mut best = (x.clone(), z.clone(), f64::INFINITY);
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        let s = sdp.eval(&x);
        let (Some(chol_s), Some(chol_z)) = (factor_blocks(&s), factor_blocks(&z)) else {
            // Rounding pushed the iterate onto the cone boundary.
            return (best.0, best.1, SolverStatus::NumericalTrouble, iterations);
        };
        let gap = s.trace_product(&z);
        let rd = &sdp.c - sdp.adjoint(&z);
        let merit = gap.max(rd.amax());
        if merit < best.2 {
            best = (x.clone(), z.clone(), merit);
        }
        if gap <= tol && rd.amax() <= tol {
            return (x, z, SolverStatus::Optimal, iterations);
        }
        iterations += 1;

        let w = BlockDiag {
            blocks: [chol_s[0].inverse(), chol_s[1].inverse(), chol_s[2].inverse()],
        };
        let mu = gap / nu;
        let Some(schur) = SchurFactor::new(schur_complement(sdp, &w, &z)) else {
            return (best.0, best.1, SolverStatus::NumericalTrouble, iterations);
        };

        // Affine-scaling predictor.
        let (_, ds_a, dz_a) = direction(sdp, &schur, &w, &z, &BlockDiag::zeros(n));
        let ap = max_step(&chol_s, &ds_a).min(1.0);
        let ad = max_step(&chol_z, &dz_a).min(1.0);
        let mut mu_aff = 0.0;
        for b in 0..3 {
            let sb = &s.blocks[b] + &ds_a.blocks[b] * ap;
            let zb = &z.blocks[b] + &dz_a.blocks[b] * ad;
            mu_aff += sb.component_mul(&zb).sum();
        }
        mu_aff /= nu;
        let sigma = (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0);

        // Centering-corrector with the second-order term.
        let mut rc = BlockDiag::zeros(n);
        for b in 0..3 {
            let cross = &w.blocks[b] * &ds_a.blocks[b] * &dz_a.blocks[b];
            rc.blocks[b] = &w.blocks[b] * (sigma * mu) - (&cross + cross.transpose()) * 0.5;
        }
        let (dx, ds, dz) = direction(sdp, &schur, &w, &z, &rc);
        let ap = (STEP_FRACTION * max_step(&chol_s, &ds)).min(1.0);
        let ad = (STEP_FRACTION * max_step(&chol_z, &dz)).min(1.0);
        if ap < 1e-8 && ad < 1e-8 {
            return (best.0, best.1, SolverStatus::NumericalTrouble, iterations);
        }
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi += ap * di;
        }
        for b in 0..3 {
            z.blocks[b] += &dz.blocks[b] * ad;
            let sym = (&z.blocks[b] + z.blocks[b].transpose()) * 0.5;
            z.blocks[b] = sym;
        }
    }
    (best.0, best.1, SolverStatus::MaxIterations, iterations)
}

fn factor_blocks(x: &BlockDiag) -> Option<[Chol; 3]> {
    Some([
        Cholesky::new(x.blocks[0].clone())?,
        Cholesky::new(x.blocks[1].clone())?,
        Cholesky::new(x.blocks[2].clone())?,
    ])
}

/// `M = 𝓕ᵀ K 𝓕` with `K_b = W_b ⊛ Z_b`.
fn schur_complement(sdp: &StabilitySDP, w: &BlockDiag, z: &BlockDiag) -> DMatrix<f64> {
    let m = sdp.m;
    let len = sdp.svec_len();
    let k1 = sym_kron_unchecked(&w.blocks[0], &z.blocks[0]);
    let k2 = sym_kron_unchecked(&w.blocks[1], &z.blocks[1]);
    let k3 = sym_kron_unchecked(&w.blocks[2], &z.blocks[2]);

    let mut out = DMatrix::zeros(m, m);
    out[(0, 0)] = w.blocks[0].component_mul(&z.blocks[0]).sum();
    let wz = &z.blocks[0] * &w.blocks[0];
    let u = svec_dense(&((&wz + wz.transpose()) * 0.5));
    let cross = sdp.lyap.tr_mul(&u);
    out.view_mut((1, 0), (len, 1)).copy_from(&cross);
    out.view_mut((0, 1), (1, len)).copy_from(&cross.transpose());

    let kl = &k1 * &sdp.lyap;
    let mut inner = sdp.lyap.tr_mul(&kl);
    inner += k2;
    inner += k3;
    out.view_mut((1, 1), (len, len)).copy_from(&inner);
    out
}

/// Cholesky factor of the Schur complement. When rounding has destroyed
/// definiteness the diagonal is shifted slightly and the solve is refined
/// against the unshifted matrix.
struct SchurFactor {
    m: DMatrix<f64>,
    chol: Chol,
    shifted: bool,
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<SchurFactor> {
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Some(SchurFactor {
                m,
                chol,
                shifted: false,
            });
        }
        let scale = m.diagonal().amax();
        let mut shift = 1e-14 * scale;
        for _ in 0..8 {
            let mut shifted = m.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += shift;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Some(SchurFactor { m, chol, shifted: true });
            }
            shift *= 100.0;
        }
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        if self.shifted {
            for _ in 0..3 {
                let r = rhs - &self.m * &x;
                x += self.chol.solve(&r);
            }
        }
        x
    }
}

/// Solves the HKM Newton system for the target `rc = σμS⁻¹ − (corrector)`.
fn direction(
    sdp: &StabilitySDP,
    schur: &SchurFactor,
    w: &BlockDiag,
    z: &BlockDiag,
    rc: &BlockDiag,
) -> (DVector<f64>, BlockDiag, BlockDiag) {
    let rhs = sdp.adjoint(rc) - &sdp.c;
    let dx = schur.solve(&rhs);
    let ds = sdp.apply(dx.as_slice());
    let mut dz = BlockDiag::zeros(sdp.n);
    for b in 0..3 {
        let t = &w.blocks[b] * &ds.blocks[b] * &z.blocks[b];
        dz.blocks[b] = &rc.blocks[b] - &z.blocks[b] - (&t + t.transpose()) * 0.5;
    }
    (dx, ds, dz)
}

/// Largest `α` with `X + αD ⪰ 0`, given the Cholesky factors of `X ≻ 0`.
fn max_step(chol: &[Chol; 3], d: &BlockDiag) -> f64 {
    let mut alpha = f64::INFINITY;
    for (c, db) in chol.iter().zip(&d.blocks) {
        let l = c.l();
        let Some(a) = l.solve_lower_triangular(db) else {
            return 0.0;
        };
        let Some(y) = l.solve_lower_triangular(&a.transpose()) else {
            return 0.0;
        };
        let y = (&y + y.transpose()) * 0.5;
        let lmin = y.symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

/// Stacked optimality residual `[𝓕ᵀ svec(Z) − c; svec(½(S_b Z_b + Z_b S_b))]`.
fn optimality_residual(sdp: &StabilitySDP, x: &[f64], z: &BlockDiag) -> DVector<f64> {
    let len = sdp.svec_len();
    let s = sdp.eval(x);
    let mut r = DVector::zeros(sdp.m + 3 * len);
    r.rows_mut(0, sdp.m).copy_from(&(sdp.adjoint(z) - &sdp.c));
    for b in 0..3 {
        let p = &s.blocks[b] * &z.blocks[b];
        let comp = svec_dense(&((&p + p.transpose()) * 0.5));
        r.rows_mut(sdp.m + b * len, len).copy_from(&comp);
    }
    r
}

/// Newton's method on the optimality residual from a near-optimal iterate.
/// Returns the refined pair only when it lowers the residual and stays in
/// the cones up to rounding.
fn newton_refine(sdp: &StabilitySDP, x0: &[f64], z0: &BlockDiag) -> Option<(Vec<f64>, BlockDiag)> {
    let n = sdp.n;
    let m = sdp.m;
    let len = sdp.svec_len();
    let size = m + 3 * len;
    let f = sdp.f_matrix();
    let id = DMatrix::<f64>::identity(n, n);

    let mut x = x0.to_vec();
    let mut z = z0.clone();
    let mut r = optimality_residual(sdp, &x, &z);
    let start = r.amax();
    for _ in 0..REFINE_STEPS {
        if r.amax() <= REFINE_TARGET {
            break;
        }
        let s = sdp.eval(&x);
        let mut jac = DMatrix::zeros(size, size);
        jac.view_mut((0, m), (m, 3 * len)).copy_from(&f.transpose());
        for b in 0..3 {
            let kz = sym_kron_unchecked(&z.blocks[b], &id);
            let ks = sym_kron_unchecked(&s.blocks[b], &id);
            let row = m + b * len;
            jac.view_mut((row, 0), (len, m)).copy_from(&(kz * f.rows(b * len, len)));
            jac.view_mut((row, m + b * len), (len, len)).copy_from(&ks);
        }
        let lu = Lu::factor(&jac);
        if lu.rcond() < REFINE_MIN_RCOND {
            break;
        }
        let step = lu.solve(&(-&r));
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        let dz = BlockDiag::from_svec(step.rows(m, 3 * len).as_slice(), n);
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..REFINE_BACKTRACKS {
            let xt: Vec<f64> = x
                .iter()
                .zip(step.rows(0, m).iter())
                .map(|(xi, di)| xi + alpha * di)
                .collect();
            let mut zt = z.clone();
            for b in 0..3 {
                zt.blocks[b] += &dz.blocks[b] * alpha;
            }
            let rt = optimality_residual(sdp, &xt, &zt);
            if rt.amax() < r.amax() && within_cones(&sdp.eval(&xt), &zt) {
                x = xt;
                z = zt;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(r.amax() < start) {
        return None;
    }
    Some((x, z))
}

fn within_cones(s: &BlockDiag, z: &BlockDiag) -> bool {
    (0..3).all(|b| {
        s.blocks[b].symmetric_eigenvalues().min() >= -REFINE_CONE_SLACK
            && z.blocks[b].symmetric_eigenvalues().min() >= -REFINE_CONE_SLACK
    })
}

/// Smallest correction of `Z` in Frobenius norm that restores dual
/// equality `𝓕ᵀ svec(Z) = c`. The interior-point loop can stall with the
/// gap converged but the dual step length collapsing before the equality
/// residual reaches the tolerance.
fn project_dual(sdp: &StabilitySDP, z: &BlockDiag) -> Option<BlockDiag> {
    let f = sdp.f_matrix();
    let rd = &sdp.c - sdp.adjoint(z);
    let y = Cholesky::new(f.tr_mul(&f))?.solve(&rd);
    let dz = BlockDiag::from_svec((&f * y).as_slice(), sdp.n);
    let mut out = z.clone();
    for b in 0..3 {
        out.blocks[b] += &dz.blocks[b];
        if out.blocks[b].symmetric_eigenvalues().min() < -REFINE_CONE_SLACK {
            return None;
        }
    }
    Some(out)
}
