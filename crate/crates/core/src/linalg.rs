//! Dense LU factorization with partial pivoting and a one-norm condition
//! estimator.
//!
//! `nalgebra` provides an LU, but not a transposed solve, which the
//! condition estimator and the adjoint sensitivity solve both need.

use nalgebra::{DMatrix, DVector};

const BLOCK: usize = 48;

/// `P A = L U`, stored in place LAPACK-style (unit lower `L` below the
/// diagonal, `U` on and above it, row interchanges in `pivots`).
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
    norm1: f64,
    singular: bool,
}

impl Lu {
    /// Blocked right-looking factorization; the trailing update is a
    /// matrix product.
    pub fn factor(a: &DMatrix<f64>) -> Lu {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.nrows();
        let norm1 = one_norm(a);
        let mut m = a.clone();
        let mut pivots = vec![0; n];
        let mut singular = false;

        for k0 in (0..n).step_by(BLOCK) {
            let kb = BLOCK.min(n - k0);
            let end = k0 + kb;
            for k in k0..end {
                let (p, best) = (k..n).fold((k, m[(k, k)].abs()), |acc, i| {
                    let v = m[(i, k)].abs();
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
                pivots[k] = p;
                if p != k {
                    m.swap_rows(k, p);
                }
                if best == 0.0 || !best.is_finite() {
                    singular = true;
                    continue;
                }
                let inv = 1.0 / m[(k, k)];
                m.view_mut((k + 1, k), (n - k - 1, 1)).scale_mut(inv);
                for j in k + 1..end {
                    let f = m[(k, j)];
                    if f != 0.0 {
                        for i in k + 1..n {
                            m[(i, j)] -= f * m[(i, k)];
                        }
                    }
                }
            }
            if end == n {
                continue;
            }
            // U12 = L11⁻¹ A12 with unit lower-triangular L11.
            for j in end..n {
                for k in k0..end {
                    let f = m[(k, j)];
                    if f != 0.0 {
                        for i in k + 1..end {
                            m[(i, j)] -= f * m[(i, k)];
                        }
                    }
                }
            }
            let l21 = m.view((end, k0), (n - end, kb)).clone_owned();
            let u12 = m.view((k0, end), (kb, n - end)).clone_owned();
            m.view_mut((end, end), (n - end, n - end)).gemm(-1.0, &l21, &u12, 1.0);
        }
        Lu {
            n,
            lu: m.as_slice().to_vec(),
            pivots,
            norm1,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// An exactly zero (or non-finite) pivot was met.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for (k, &p) in self.pivots.iter().enumerate() {
            x.swap(k, p);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                let col = &self.lu[k * n + k + 1..(k + 1) * n];
                for (xi, l) in x[k + 1..].iter_mut().zip(col) {
                    *xi -= xk * l;
                }
            }
        }
        for k in (0..n).rev() {
            x[k] /= self.lu[k + k * n];
            let xk = x[k];
            if xk != 0.0 {
                let col = &self.lu[k * n..k * n + k];
                for (xi, u) in x[..k].iter_mut().zip(col) {
                    *xi -= xk * u;
                }
            }
        }
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_transpose_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_transpose_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        // Uᵀ y = b
        for k in 0..n {
            let col = &self.lu[k * n..k * n + k];
            let dot: f64 = col.iter().zip(&x[..k]).map(|(u, y)| u * y).sum();
            x[k] = (x[k] - dot) / self.lu[k + k * n];
        }
        // Lᵀ z = y
        for k in (0..n).rev() {
            let col = &self.lu[k * n + k + 1..(k + 1) * n];
            let dot: f64 = col.iter().zip(&x[k + 1..]).map(|(l, z)| l * z).sum();
            x[k] -= dot;
        }
        for (k, &p) in self.pivots.iter().enumerate().rev() {
            x.swap(k, p);
        }
    }

    /// Estimate of the reciprocal one-norm condition number, using Hager's
    /// method with Higham's refinements. Returns 0 for singular factors.
    pub fn rcond(&self) -> f64 {
        if self.singular || self.norm1 == 0.0 {
            return 0.0;
        }
        let inv_norm = self.inverse_norm1_estimate();
        if !inv_norm.is_finite() || inv_norm == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm1 * inv_norm)
    }

    /// Condition estimate `‖A‖₁ ‖A⁻¹‖₁`; infinite when singular.
    pub fn cond_estimate(&self) -> f64 {
        let r = self.rcond();
        if r == 0.0 {
            f64::INFINITY
        } else {
            1.0 / r
        }
    }

    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            self.solve_in_place(&mut x);
            let new_est: f64 = x.iter().map(|v| v.abs()).sum();
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let mut z: Vec<f64> = x.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose_in_place(&mut z);
            let (j, zmax) = z.iter().enumerate().fold(
                (0, 0.0_f64),
                |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
            );
            if iter > 0 && (j == last_j || zmax <= z.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()) {
                break;
            }
            last_j = j;
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        // Higham's alternating-sign probe guards against the classic
        // counterexamples of the plain iteration.
        let mut alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        self.solve_in_place(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite_matrix(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
