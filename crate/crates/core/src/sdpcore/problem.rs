use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symkernel::{smat_dense, svec_dense, svec_dense_into, svec_len, svec_positions};
use crate::sysmodel::lyapunov_operator;

/// Default lower bound `ε` on the Lyapunov certificate.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Symmetric matrix of dimension `3n` stored as its three diagonal `n×n` blocks:
/// the Lyapunov block, the lower-bound block and the upper-bound block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    pub blocks: [DMatrix<f64>; 3],
}

impl BlockDiag {
    pub fn zeros(n: usize) -> BlockDiag {
        BlockDiag {
            blocks: [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn trace_product(&self, other: &BlockDiag) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.component_mul(b).sum())
            .sum()
    }

    /// Concatenated per-block svec, length `3·n(n+1)/2`.
    pub fn svec(&self) -> DVector<f64> {
        let len = svec_len(self.dim());
        let mut out = DVector::zeros(3 * len);
        for (b, blk) in self.blocks.iter().enumerate() {
            svec_dense_into(blk, &mut out.as_mut_slice()[b * len..(b + 1) * len]);
        }
        out
    }

    pub fn from_svec(v: &[f64], n: usize) -> BlockDiag {
        let len = svec_len(n);
        debug_assert_eq!(v.len(), 3 * len);
        BlockDiag {
            blocks: [
                smat_dense(&v[..len], n),
                smat_dense(&v[len..2 * len], n),
                smat_dense(&v[2 * len..], n),
            ],
        }
    }

    /// Full `3n×3n` dense form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(3 * n, 3 * n);
        for (b, blk) in self.blocks.iter().enumerate() {
            out.view_mut((b * n, b * n), (n, n)).copy_from(blk);
        }
        out
    }
}

/// Standard-form data of the stability SDP for a fixed Jacobian.
///
/// Coordinates are 0-based: index 0 is `η`, indices `1..m` are `svec(Φ)` in
/// the orthonormal basis `{T_k}`, so `F_{k+1} = diag(−JᵀT_k − T_kJ, T_k, −T_k)`.
/// The coefficient matrices are never stored; `lyap` holds the only
/// `J`-dependent part, the operator `svec(T) ↦ svec(−JᵀT − TJ)`.
#[derive(Debug, Clone)]
pub struct StabilitySDP {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub j: DMatrix<f64>,
    pub lyap: DMatrix<f64>,
    pub c: DVector<f64>,
}

pub fn build_sdp(j: &DMatrix<f64>, eps: f64) -> Result<StabilitySDP> {
    if !j.is_square() || j.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "J must be square, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")));
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("J contains non-finite entries".into()));
    }
    let n = j.nrows();
    let m = 1 + svec_len(n);
    let mut c = DVector::zeros(m);
    c[0] = 1.0;
    Ok(StabilitySDP {
        n,
        m,
        eps,
        j: j.clone(),
        lyap: lyapunov_operator(j),
        c,
    })
}

impl StabilitySDP {
    pub fn svec_len(&self) -> usize {
        svec_len(self.n)
    }

    pub fn f0(&self) -> BlockDiag {
        let n = self.n;
        BlockDiag {
            blocks: [
                DMatrix::zeros(n, n),
                DMatrix::identity(n, n) * -self.eps,
                DMatrix::identity(n, n),
            ],
        }
    }

    /// Coefficient matrix of coordinate `i` (0-based).
    pub fn coefficient(&self, i: usize) -> BlockDiag {
        assert!(i < self.m, "coefficient index {i} out of range");
        let n = self.n;
        if i == 0 {
            return BlockDiag {
                blocks: [DMatrix::identity(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
            };
        }
        let (k, l) = svec_positions(n)[i - 1];
        let mut t = DMatrix::zeros(n, n);
        let v = if k == l { 1.0 } else { 1.0 / SQRT_2 };
        t[(k, l)] = v;
        t[(l, k)] = v;
        let lyap = -(self.j.transpose() * &t) - &t * &self.j;
        BlockDiag {
            blocks: [lyap, t.clone(), -t],
        }
    }

    /// `Σ_i x_i F_i` (without `F0`).
    pub fn apply(&self, x: &[f64]) -> BlockDiag {
        let n = self.n;
        let phi = smat_dense(&x[1..], n);
        let lyap = DMatrix::identity(n, n) * x[0] - self.j.transpose() * &phi - &phi * &self.j;
        BlockDiag {
            blocks: [lyap, phi.clone(), -phi],
        }
    }

    /// Slack `F(φ) = F0 + Σ φ_i F_i`.
    pub fn eval(&self, x: &[f64]) -> BlockDiag {
        let mut s = self.apply(x);
        let n = self.n;
        for i in 0..n {
            s.blocks[1][(i, i)] -= self.eps;
            s.blocks[2][(i, i)] += 1.0;
        }
        s
    }

    /// Adjoint `(Tr(F_i Y))_i` of [`StabilitySDP::apply`].
    pub fn adjoint(&self, y: &BlockDiag) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        out[0] = y.blocks[0].trace();
        let lyap_part = -(&self.j * &y.blocks[0]) - &y.blocks[0] * self.j.transpose();
        let mut rest = svec_dense(&lyap_part);
        rest += svec_dense(&y.blocks[1]);
        rest -= svec_dense(&y.blocks[2]);
        out.rows_mut(1, self.m - 1).copy_from(&rest);
        out
    }

    /// `𝓕`: the `3N × m` matrix whose columns are the concatenated svec of each `F_i`.
    pub fn f_matrix(&self) -> DMatrix<f64> {
        let len = self.svec_len();
        let mut f = DMatrix::zeros(3 * len, self.m);
        let id = svec_dense(&DMatrix::identity(self.n, self.n));
        f.view_mut((0, 0), (len, 1)).copy_from(&id);
        f.view_mut((0, 1), (len, len)).copy_from(&self.lyap);
        for k in 0..len {
            f[(len + k, 1 + k)] = 1.0;
            f[(2 * len + k, 1 + k)] = -1.0;
        }
        f
    }

    /// Strictly feasible interior point `Φ = (1+ε)/2 I` with `η` large
    /// enough that the Lyapunov block has the same margin as the bound blocks.
    pub fn interior_point(&self) -> Vec<f64> {
        let n = self.n;
        let scale = 0.5 * (1.0 + self.eps);
        let sym = (&self.j + self.j.transpose()) * scale;
        let lmax = sym.symmetric_eigenvalues().max();
        let margin = 0.5 * (1.0 - self.eps);
        let mut x = vec![0.0; self.m];
        x[0] = lmax + margin;
        let id = svec_dense(&DMatrix::identity(n, n)) * scale;
        x[1..].copy_from_slice(id.as_slice());
        x
    }
}

/// Converts `(η, svec(Φ))` into the raw upper-triangle entries
/// `(η, Φ11, Φ12, …, Φnn)`: off-diagonal coordinates are divided by √2.
pub fn svec_to_raw_coordinates(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    for (p, (i, j)) in svec_positions(n).into_iter().enumerate() {
        if i != j {
            out[1 + p] /= SQRT_2;
        }
    }
    out
}

pub fn raw_to_svec_coordinates(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    for (p, (i, j)) in svec_positions(n).into_iter().enumerate() {
        if i != j {
            out[1 + p] *= SQRT_2;
        }
    }
    out
}
