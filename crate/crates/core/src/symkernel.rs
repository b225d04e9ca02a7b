//! Vector-space kernel for real symmetric matrices.
//!
//! `svec` stacks the upper triangle row by row and scales off-diagonal
//! entries by √2, so that `Tr(XY) = svec(X)ᵀ svec(Y)`. Everything else in
//! the crate (SDP data, dual blocks, KKT systems) is expressed in these
//! coordinates.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real symmetric matrix. Symmetry is structural: every mutation
/// writes both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> SymMatrix {
        assert!(dim >= 1, "symmetric matrix dimension must be at least 1");
        SymMatrix {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> SymMatrix {
        assert!(dim >= 1, "symmetric matrix dimension must be at least 1");
        SymMatrix {
            data: DMatrix::identity(dim, dim),
        }
    }

    /// Builds from the upper triangle of `a`; the strict lower triangle is ignored.
    pub fn from_upper(a: &DMatrix<f64>) -> Result<SymMatrix> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "symmetric matrix needs a non-empty square input, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        Ok(SymMatrix {
            data: DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] }),
        })
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetric_part(a: &DMatrix<f64>) -> Result<SymMatrix> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "symmetric part needs a non-empty square input, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(SymMatrix {
            data: (a + a.transpose()) * 0.5,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<SymMatrix> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("symmetric matrix rows must form a square".into()));
        }
        SymMatrix::from_upper(&DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.data[(i, j)]
        } else {
            self.data[(j, i)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// `Tr(self · other)`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.data.component_mul(&other.data).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// `svec` coordinates of a symmetric matrix of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SVec {
    dim: usize,
    values: Vec<f64>,
}

impl SVec {
    pub fn new(values: Vec<f64>) -> Result<SVec> {
        let dim = triangular_root(values.len())
            .ok_or_else(|| Error::Dimension(format!("svec length {} is not of the form n(n+1)/2", values.len())))?;
        Ok(SVec { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dot(&self, other: &SVec) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn to_matrix(&self) -> SymMatrix {
        SymMatrix {
            data: smat_dense(&self.values, self.dim),
        }
    }
}

/// `n(n+1)/2`.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`svec_len`], if `len` is triangular and positive.
pub fn triangular_root(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let mut n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while svec_len(n) < len {
        n += 1;
    }
    (svec_len(n) == len).then_some(n)
}

/// Position of `(i, j)`, `i ≤ j`, in the row-major upper-triangle ordering.
#[inline]
pub fn svec_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

pub fn svec(x: &SymMatrix) -> SVec {
    let n = x.dim();
    let mut values = vec![0.0; svec_len(n)];
    svec_dense_into(&x.data, &mut values);
    SVec { dim: n, values }
}

/// Inverse of [`svec`] on a raw coordinate slice.
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let n = triangular_root(v.len())
        .ok_or_else(|| Error::Dimension(format!("svec length {} is not of the form n(n+1)/2", v.len())))?;
    Ok(SymMatrix { data: smat_dense(v, n) })
}

/// `svec` of the symmetric part of a dense matrix, written into `out`.
pub fn svec_dense_into(a: &DMatrix<f64>, out: &mut [f64]) {
    let n = a.nrows();
    debug_assert_eq!(out.len(), svec_len(n));
    let mut p = 0;
    for i in 0..n {
        out[p] = a[(i, i)];
        p += 1;
        for j in i + 1..n {
            out[p] = FRAC_1_SQRT_2 * (a[(i, j)] + a[(j, i)]);
            p += 1;
        }
    }
}

pub fn svec_dense(a: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(svec_len(a.nrows()));
    svec_dense_into(a, out.as_mut_slice());
    out
}

pub fn smat_dense(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut a = DMatrix::zeros(n, n);
    let mut p = 0;
    for i in 0..n {
        a[(i, i)] = v[p];
        p += 1;
        for j in i + 1..n {
            let x = v[p] * FRAC_1_SQRT_2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            p += 1;
        }
    }
    a
}

/// Upper-triangle position pairs in svec order.
pub fn svec_positions(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(svec_len(n));
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Matrix of the operator `svec(X) ↦ svec(½(N X Mᵀ + M X Nᵀ))` on symmetric `X`.
pub fn sym_kron(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() || !n.is_square() || m.nrows() != n.nrows() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "sym_kron needs two square matrices of equal size, got {}x{} and {}x{}",
            m.nrows(),
            m.ncols(),
            n.nrows(),
            n.ncols()
        )));
    }
    Ok(sym_kron_unchecked(m, n))
}

pub(crate) fn sym_kron_unchecked(m: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = m.nrows();
    let pos = svec_positions(dim);
    let len = pos.len();
    let mut out = DMatrix::zeros(len, len);
    for (q, &(k, l)) in pos.iter().enumerate() {
        let cq = if k == l { 0.5 } else { FRAC_1_SQRT_2 };
        let col = &mut out.as_mut_slice()[q * len..(q + 1) * len];
        for (p, &(i, j)) in pos.iter().enumerate() {
            let rp = if i == j { 1.0 } else { SQRT_2 };
            let s = n[(i, k)] * m[(j, l)] + n[(i, l)] * m[(j, k)] + m[(i, k)] * n[(j, l)] + m[(i, l)] * n[(j, k)];
            col[p] = 0.5 * rp * cq * s;
        }
    }
    out
}

/// Orthonormal basis of the symmetric matrices, ordered like `svec`:
/// `E_kk` on the diagonal and `(E_kl + E_lk)/√2` for `k < l`.
pub fn sym_basis(n: usize) -> Vec<SymMatrix> {
    assert!(n >= 1, "basis dimension must be at least 1");
    svec_positions(n)
        .into_iter()
        .map(|(k, l)| {
            let mut t = SymMatrix::zeros(n);
            t.set(k, l, if k == l { 1.0 } else { FRAC_1_SQRT_2 });
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rand_sym(n: usize, seed: u64) -> SymMatrix {
        let mut s = seed.wrapping_add(17);
        let a = DMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        });
        SymMatrix::from_upper(&a).unwrap()
    }

    fn rand_dense(n: usize, seed: u64) -> DMatrix<f64> {
        rand_sym(n, seed).into_matrix() + DMatrix::from_fn(n, n, |i, j| (i as f64 - j as f64) * 0.1 * (seed % 7) as f64)
    }

    fn trace_double_loop(x: &SymMatrix, y: &SymMatrix) -> f64 {
        let n = x.dim();
        let mut t = 0.0;
        for i in 0..n {
            for k in 0..n {
                t += x.get(i, k) * y.get(k, i);
            }
        }
        t
    }

    #[test]
    fn svec_small_examples() {
        let x = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let v = svec(&x);
        assert_eq!(v.values(), &[1.0, 2.0 * SQRT_2, 3.0]);
        assert_eq!(svec(&SymMatrix::identity(3)).values(), &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn svec_dot_is_trace_on_random_pair() {
        let x = rand_sym(4, 1);
        let y = rand_sym(4, 2);
        let t = trace_double_loop(&x, &y);
        assert!((svec(&x).dot(&svec(&y)) - t).abs() <= 1e-12 * (1.0 + t.abs()));
    }

    #[test]
    fn smat_examples_and_errors() {
        let m = smat(&[1.0, 2.0 * SQRT_2, 3.0]).unwrap();
        assert!((m.get(0, 1) - 2.0).abs() < 1e-15);
        assert_eq!(m.get(1, 1), 3.0);
        assert_eq!(smat(&[0.0; 6]).unwrap(), SymMatrix::zeros(3));
        assert!(matches!(smat(&[0.0; 5]), Err(Error::Dimension(_))));
        assert!(smat(&[]).is_err());
    }

    #[test]
    fn index_matches_positions() {
        for n in 1..6 {
            for (p, (i, j)) in svec_positions(n).into_iter().enumerate() {
                assert_eq!(svec_index(i, j, n), p);
            }
        }
    }

    #[test]
    fn sym_kron_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let k = sym_kron(&id, &id).unwrap();
        assert!((k - DMatrix::<f64>::identity(6, 6)).amax() < 1e-15);

        let k = sym_kron(&DMatrix::from_element(1, 1, 2.0), &DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(k[(0, 0)], 6.0);

        assert!(sym_kron(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn sym_kron_matches_direct_evaluation() {
        let m = rand_dense(3, 5);
        let n = rand_dense(3, 6);
        let x = rand_sym(3, 7);
        let op = sym_kron(&m, &n).unwrap();
        let lhs = &op * DVector::from_vec(svec(&x).into_values());
        let xm = x.as_matrix();
        let direct = (&n * xm * m.transpose() + &m * xm * n.transpose()) * 0.5;
        let rhs = svec_dense(&direct);
        assert!((lhs - rhs).amax() < 1e-13);
    }

    #[test]
    fn basis_examples() {
        let b1 = sym_basis(1);
        assert_eq!(b1.len(), 1);
        assert_eq!(b1[0].get(0, 0), 1.0);

        let b2 = sym_basis(2);
        assert_eq!(b2[0].to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(
            b2[1].to_rows(),
            vec![vec![0.0, FRAC_1_SQRT_2], vec![FRAC_1_SQRT_2, 0.0]]
        );
        assert_eq!(b2[2].to_rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);

        let b3 = sym_basis(3);
        for (i, ti) in b3.iter().enumerate() {
            for (j, tj) in b3.iter().enumerate() {
                let t = trace_double_loop(ti, tj);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t - want).abs() < 1e-15);
            }
            // svec coordinates are the basis expansion coefficients.
            for (k, v) in svec(ti).values().iter().enumerate() {
                let want = if k == i { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-15);
            }
        }
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-10.0f64..10.0, n * n)
            .prop_map(move |v| SymMatrix::from_upper(&DMatrix::from_vec(n, n, v)).unwrap())
    }

    fn pair_strategy() -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
        (1usize..7).prop_flat_map(|n| (sym_strategy(n), sym_strategy(n)))
    }

    proptest! {
        #[test]
        fn prop_svec_isometry((x, y) in pair_strategy()) {
            let t = trace_double_loop(&x, &y);
            prop_assert!((t - svec(&x).dot(&svec(&y))).abs() <= 1e-12 * (1.0 + t.abs()));
        }

        #[test]
        fn prop_round_trip((x, _y) in pair_strategy()) {
            let back = svec(&x).to_matrix();
            prop_assert!((back.as_matrix() - x.as_matrix()).amax() <= 1e-15 * (1.0 + x.as_matrix().amax()));
            let again = svec(&back);
            for (a, b) in again.values().iter().zip(svec(&x).values()) {
                prop_assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn prop_sym_kron_bilinear_and_symmetric(
            n in 1usize..5,
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let m1 = rand_dense(n, seed);
            let m2 = rand_dense(n, seed + 1);
            let nn = rand_dense(n, seed + 2);
            let lhs = sym_kron(&(&m1 * a + &m2 * b), &nn).unwrap();
            let rhs = sym_kron(&m1, &nn).unwrap() * a + sym_kron(&m2, &nn).unwrap() * b;
            prop_assert!((lhs - rhs).amax() < 1e-12);
            let swapped = sym_kron(&nn, &m1).unwrap();
            prop_assert!((sym_kron(&m1, &nn).unwrap() - swapped).amax() < 1e-14);
        }
    }
}
