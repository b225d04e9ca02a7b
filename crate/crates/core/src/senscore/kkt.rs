use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sdpcore::{build_sdp, BlockDiag, StabilityCertificate, StabilitySDP};
use crate::symkernel::{smat_dense, svec_dense, svec_len, sym_kron_unchecked};

/// A primal-dual point `ψ = (φ, υ)` of the stability SDP together with the
/// Jacobian it belongs to.
///
/// `phi = (η, svec(Φ))` has length `m = 1 + N` and `upsilon` is the
/// concatenation `svec(Υ₁), svec(Υ₂), svec(Υ₃)` of length `3N`, with
/// `N = n(n+1)/2`.
#[derive(Debug, Clone)]
pub struct KKTPoint {
    pub phi: DVector<f64>,
    pub upsilon: DVector<f64>,
    pub j: DMatrix<f64>,
    pub eps: f64,
}

impl KKTPoint {
    pub fn new(phi: DVector<f64>, upsilon: DVector<f64>, j: DMatrix<f64>, eps: f64) -> Result<KKTPoint> {
        if !j.is_square() || j.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "J must be square, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        let len = svec_len(j.nrows());
        if phi.len() != 1 + len {
            return Err(Error::Dimension(format!(
                "phi has length {}, expected {}",
                phi.len(),
                1 + len
            )));
        }
        if upsilon.len() != 3 * len {
            return Err(Error::Dimension(format!(
                "upsilon has length {}, expected {}",
                upsilon.len(),
                3 * len
            )));
        }
        Ok(KKTPoint { phi, upsilon, j, eps })
    }

    pub fn from_certificate(cert: &StabilityCertificate, j: &DMatrix<f64>) -> Result<KKTPoint> {
        if j.nrows() != cert.n() {
            return Err(Error::Dimension(format!(
                "certificate is for n = {}, J is {}x{}",
                cert.n(),
                j.nrows(),
                j.ncols()
            )));
        }
        KKTPoint::new(
            DVector::from_vec(cert.primal_vector()),
            DVector::from_vec(cert.dual_vector()),
            j.clone(),
            cert.eps,
        )
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    /// Length of `ψ`, i.e. the order of `G′`.
    pub fn len(&self) -> usize {
        self.phi.len() + self.upsilon.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn sdp(&self) -> Result<StabilitySDP> {
        build_sdp(&self.j, self.eps)
    }

    fn dual_blocks(&self) -> BlockDiag {
        BlockDiag::from_svec(self.upsilon.as_slice(), self.n())
    }
}

/// `G(ψ, J) = [𝓕ᵀυ − c; svec(½(F_b Υ_b + Υ_b F_b)) for each block b]`.
pub fn assemble_g(pt: &KKTPoint) -> Result<DVector<f64>> {
    let sdp = pt.sdp()?;
    let len = sdp.svec_len();
    let m = sdp.m;
    let y = pt.dual_blocks();
    let s = sdp.eval(pt.phi.as_slice());

    let mut g = DVector::zeros(m + 3 * len);
    g.rows_mut(0, m).copy_from(&(sdp.adjoint(&y) - &sdp.c));
    for b in 0..3 {
        let p = &s.blocks[b] * &y.blocks[b];
        g.rows_mut(m + b * len, len)
            .copy_from(&svec_dense(&((&p + p.transpose()) * 0.5)));
    }
    Ok(g)
}

/// `G′ = [[0, 𝓕ᵀ], [(Υ ⊛ I)𝓕, F ⊛ I]]`, every `⊛` taken block by block.
pub fn assemble_gprime(pt: &KKTPoint) -> Result<DMatrix<f64>> {
    let sdp = pt.sdp()?;
    let n = sdp.n;
    let len = sdp.svec_len();
    let m = sdp.m;
    let y = pt.dual_blocks();
    let s = sdp.eval(pt.phi.as_slice());
    let f = sdp.f_matrix();
    let id = DMatrix::<f64>::identity(n, n);

    let mut gp = DMatrix::zeros(m + 3 * len, m + 3 * len);
    gp.view_mut((0, m), (m, 3 * len)).copy_from(&f.transpose());
    for b in 0..3 {
        let row = m + b * len;
        let yk = sym_kron_unchecked(&y.blocks[b], &id);
        gp.view_mut((row, 0), (len, m)).copy_from(&(yk * f.rows(b * len, len)));
        gp.view_mut((row, m + b * len), (len, len))
            .copy_from(&sym_kron_unchecked(&s.blocks[b], &id));
    }
    Ok(gp)
}

/// `∂G/∂J_ij` (0-based indices). Only the Lyapunov block depends on `J`:
/// `∂F_k⁽¹⁾/∂J_ij = −E_ji T_k − T_k E_ij` and `∂F_0/∂J_ij = 0`.
pub fn assemble_dg_dj(pt: &KKTPoint, i: usize, j: usize) -> Result<DVector<f64>> {
    let n = pt.n();
    if i >= n || j >= n {
        return Err(Error::Dimension(format!("entry ({i}, {j}) outside a {n}x{n} Jacobian")));
    }
    let len = svec_len(n);
    let m = pt.m();
    let y1 = smat_dense(&pt.upsilon.as_slice()[..len], n);
    let phi = smat_dense(&pt.phi.as_slice()[1..], n);

    let mut out = DVector::zeros(m + 3 * len);

    // Dual feasibility rows: Tr(∂F_k⁽¹⁾ Υ₁) = −Tr(T_k (Υ₁E_ji + E_ijΥ₁)).
    let mut x = DMatrix::zeros(n, n);
    for r in 0..n {
        x[(r, i)] += y1[(r, j)];
        x[(i, r)] += y1[(j, r)];
    }
    out.rows_mut(1, len).copy_from(&(-svec_dense(&x)));

    // Complementarity rows of block 1: (Υ₁ ⊛ I) svec(D) with D = −E_jiΦ − ΦE_ij.
    let mut d = DMatrix::zeros(n, n);
    for r in 0..n {
        d[(j, r)] -= phi[(i, r)];
        d[(r, j)] -= phi[(r, i)];
    }
    let p = &d * &y1;
    out.rows_mut(m, len)
        .copy_from(&svec_dense(&((&p + p.transpose()) * 0.5)));
    Ok(out)
}
