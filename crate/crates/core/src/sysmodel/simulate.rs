use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symkernel::SymMatrix;

pub const DEFAULT_DT: f64 = 0.01;

/// Relative slack on the decay bound `L(t) ≤ L(0) e^{ηt}`.
pub const DECAY_SLACK: f64 = 1e-6;

/// Sampled solution of `ẋ = Jx` with the Lyapunov value `L = xᵀΦx`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub lyapunov_values: Vec<f64>,
    /// Sample indices where `L(t) > L(0) e^{ηt} (1 + DECAY_SLACK)`; only
    /// checked when `η < 0`.
    pub violations: Vec<usize>,
}

impl Trajectory {
    pub fn bound_holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Integrates `ẋ = Jx` with classical RK4 at fixed step `dt` and checks
/// the certificate's decay bound at every sample.
pub fn simulate_decay(
    j: &DMatrix<f64>,
    phi: &SymMatrix,
    eta: f64,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = j.nrows();
    if !j.is_square() || phi.dim() != n || x0.len() != n {
        return Err(Error::Dimension(format!(
            "J is {}x{}, Φ is {}x{}, x0 has {} entries",
            j.nrows(),
            j.ncols(),
            phi.dim(),
            phi.dim(),
            x0.len()
        )));
    }
    if !(dt > 0.0 && t_end > 0.0 && dt <= t_end) {
        return Err(Error::Config(format!(
            "need 0 < dt <= t_end, got dt={dt}, t_end={t_end}"
        )));
    }
    let steps = ((t_end / dt) - 1e-9).ceil() as usize;
    let lyap = |x: &DVector<f64>| x.dot(&(phi.as_matrix() * x));

    let mut x = DVector::from_column_slice(x0);
    let mut t = 0.0;
    let l0 = lyap(&x);
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        lyapunov_values: Vec::with_capacity(steps + 1),
        violations: Vec::new(),
    };
    traj.times.push(t);
    traj.states.push(x.iter().copied().collect());
    traj.lyapunov_values.push(l0);

    for step in 1..=steps {
        let h = if step == steps { t_end - t } else { dt };
        let k1 = j * &x;
        let k2 = j * (&x + &k1 * (0.5 * h));
        let k3 = j * (&x + &k2 * (0.5 * h));
        let k4 = j * (&x + &k3 * h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = if step == steps { t_end } else { step as f64 * dt };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: t });
        }
        let l = lyap(&x);
        if eta < 0.0 && l > l0 * (eta * t).exp() * (1.0 + DECAY_SLACK) {
            traj.violations.push(step);
        }
        traj.times.push(t);
        traj.states.push(x.iter().copied().collect());
        traj.lyapunov_values.push(l);
    }
    Ok(traj)
}
