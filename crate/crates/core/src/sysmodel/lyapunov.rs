use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::symkernel::{smat_dense, svec_dense, sym_kron_unchecked, SymMatrix};

/// Default right-hand-side scale `ξ` of the Lyapunov equation.
pub const DEFAULT_XI: f64 = -1.0;

const DEGENERATE_RCOND: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub phi: SymMatrix,
    /// `Φ ≻ 0`, i.e. `J` is asymptotically stable.
    pub positive_definite: bool,
}

/// Matrix of `svec(Φ) ↦ svec(−JᵀΦ − ΦJ)` in svec coordinates.
pub fn lyapunov_operator(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    sym_kron_unchecked(&DMatrix::identity(n, n), &j.transpose()) * -2.0
}

/// Solves `−JᵀΦ − ΦJ + ξI = 0` for symmetric `Φ`.
pub fn solve_lyapunov(j: &DMatrix<f64>, xi: f64) -> Result<LyapunovSolution> {
    if !j.is_square() || j.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "J must be square, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    if !(xi < 0.0) || !xi.is_finite() {
        return Err(Error::Config(format!("xi must be a negative finite number, got {xi}")));
    }
    let n = j.nrows();
    let op = lyapunov_operator(j);
    let lu = Lu::factor(&op);
    let rcond = lu.rcond();
    if rcond < DEGENERATE_RCOND {
        return Err(Error::DegenerateSpectrum { rcond });
    }
    let rhs: DVector<f64> = svec_dense(&DMatrix::identity(n, n)) * -xi;
    let phi = smat_dense(lu.solve(&rhs).as_slice(), n);
    let positive_definite = Cholesky::new(phi.clone()).is_some();
    Ok(LyapunovSolution {
        phi: SymMatrix::from_upper(&phi)?,
        positive_definite,
    })
}
