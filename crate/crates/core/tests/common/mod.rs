//! Instance generators and independent oracles shared by the integration
//! tests. The oracles avoid the library's own solvers: eigenvalues come from
//! power iteration or nalgebra's Schur decomposition, Lyapunov solves from a
//! full n² Kronecker system.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-half_width..half_width))
}

/// Lightly damped oscillatory Jacobian `−diag(0.2 + u) + 3(R − Rᵀ)`.
/// Its stability SDP has a well-conditioned KKT system, which random dense
/// matrices of moderate size generally do not.
pub fn oscillatory(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = uniform(&mut r, n, n, 0.5);
    let mut j = (&a - a.transpose()) * 3.0;
    for i in 0..n {
        j[(i, i)] -= 0.2 + r.random::<f64>();
    }
    j
}

/// Random symmetric matrix with largest eigenvalue shifted into
/// `[−1.1, −0.1]`, using the power-iteration oracle for the shift.
pub fn symmetric_stable(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = uniform(&mut r, n, n, 1.0);
    let s = (&a + a.transpose()) * 0.5;
    let target = -0.1 - r.random::<f64>();
    let shift = power_lambda_max(&s) - target;
    s - DMatrix::identity(n, n) * shift
}

/// Largest eigenvalue of a symmetric matrix by shifted power iteration
/// with a Rayleigh-quotient estimate.
pub fn power_lambda_max(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let sigma = s.norm();
    let b = s + DMatrix::identity(n, n) * sigma;
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64).sin());
    v.normalize_mut();
    let mut lambda = v.dot(&(&b * &v));
    for _ in 0..200_000 {
        let w = &b * &v;
        let next = w.normalize();
        let l = next.dot(&(&b * &next));
        v = next;
        if (l - lambda).abs() <= 1e-15 * l.abs().max(1.0) {
            lambda = l;
            break;
        }
        lambda = l;
    }
    lambda - sigma
}

/// Largest real part of the eigenvalues, from nalgebra's Schur form.
pub fn spectral_abscissa(j: &DMatrix<f64>) -> f64 {
    j.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random non-symmetric `J` with `|spectral abscissa| ≥ margin`; the sign
/// of the abscissa alternates with the seed.
pub fn random_with_abscissa(n: usize, seed: u64, margin: f64) -> (DMatrix<f64>, f64) {
    let mut r = rng(seed);
    let a = uniform(&mut r, n, n, 1.0);
    let target = (margin + r.random::<f64>()) * if seed.is_multiple_of(2) { -1.0 } else { 1.0 };
    let shift = spectral_abscissa(&a) - target;
    let j = a - DMatrix::identity(n, n) * shift;
    let alpha = spectral_abscissa(&j);
    (j, alpha)
}

/// Solves `JᵀX + XJ = C` by vectorizing over all n² entries.
pub fn kronecker_lyapunov(j: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let jt = j.transpose();
    let op = id.kronecker(&jt) + jt.kronecker(&id);
    let x = op
        .lu()
        .solve(&DVector::from_column_slice(c.as_slice()))
        .expect("nonsingular Lyapunov operator");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Closed form for a stable `J` with ε small enough not to bind:
/// `η = −1/λ_max(P)` where `JᵀP + PJ = −I`.
pub fn closed_form_eta(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let p = kronecker_lyapunov(j, &(-DMatrix::identity(n, n)));
    -1.0 / power_lambda_max(&p)
}

/// Derivative of the closed form: `∂η/∂J_ab = vᵀ dP v / λ_max(P)²`, with `v`
/// the top eigenvector of `P` and `Jᵀ dP + dP J = −(E_baP + PE_ab)`.
pub fn closed_form_gradient(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let p = kronecker_lyapunov(j, &(-DMatrix::identity(n, n)));
    let eig = p.clone().symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let lmax = eig.eigenvalues[k];
    let v = eig.eigenvectors.column(k).clone_owned();
    DMatrix::from_fn(n, n, |a, b| {
        let mut dj = DMatrix::zeros(n, n);
        dj[(a, b)] = 1.0;
        let dp = kronecker_lyapunov(j, &(-(dj.transpose() * &p + &p * &dj)));
        (v.transpose() * dp * &v)[0] / (lmax * lmax)
    })
}

pub fn relative_error(analytic: f64, oracle: f64) -> f64 {
    (analytic - oracle).abs() / oracle.abs().max(1.0)
}
