//! Linearized system models: descriptor-form reduction, affine parametric
//! Jacobian families, the classical Lyapunov test and trajectory simulation.

mod descriptor;
mod lyapunov;
mod parametric;
mod simulate;

pub use descriptor::{reduce, DescriptorSystem, SINGULAR_RCOND};
pub use lyapunov::{lyapunov_operator, solve_lyapunov, LyapunovSolution, DEFAULT_XI};
pub use parametric::{DroopGrid, Mode, ParametricJacobian};
pub use simulate::{simulate_decay, Trajectory, DECAY_SLACK, DEFAULT_DT};
