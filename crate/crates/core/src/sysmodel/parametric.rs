use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One controllable parameter `d_k` entering the Jacobian as `d_k · M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub m: DMatrix<f64>,
    pub lo: f64,
    pub hi: f64,
}

/// Affine family `J(d) = J0 + Σ_k d_k M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricJacobian {
    j0: DMatrix<f64>,
    modes: Vec<Mode>,
    d: Vec<f64>,
}

impl ParametricJacobian {
    /// The current point `d` starts at the midpoint of each range.
    pub fn new(j0: DMatrix<f64>, modes: Vec<Mode>) -> Result<Self> {
        if !j0.is_square() || j0.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "J0 must be square, got {}x{}",
                j0.nrows(),
                j0.ncols()
            )));
        }
        for mode in &modes {
            if mode.m.shape() != j0.shape() {
                return Err(Error::Dimension(format!(
                    "mode {:?} has shape {:?}, J0 has {:?}",
                    mode.name,
                    mode.m.shape(),
                    j0.shape()
                )));
            }
        }
        let d = modes.iter().map(|m| 0.5 * (m.lo + m.hi)).collect();
        Ok(ParametricJacobian { j0, modes, d })
    }

    pub fn dim(&self) -> usize {
        self.j0.nrows()
    }

    pub fn j0(&self) -> &DMatrix<f64> {
        &self.j0
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_params(&self) -> usize {
        self.modes.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.modes.iter().map(|m| m.name.clone()).collect()
    }

    pub fn current(&self) -> &[f64] {
        &self.d
    }

    pub fn set_current(&mut self, d: &[f64]) -> Result<()> {
        self.check_len(d)?;
        self.d = d.to_vec();
        Ok(())
    }

    fn check_len(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.modes.len() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, family has {} modes",
                d.len(),
                self.modes.len()
            )));
        }
        Ok(())
    }

    pub fn jacobian_at(&self, d: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(d)?;
        let mut j = self.j0.clone();
        for (mode, &dk) in self.modes.iter().zip(d) {
            j += &mode.m * dk;
        }
        Ok(j)
    }

    /// `∂J/∂d_k`, exact for the affine family.
    pub fn djacobian(&self, k: usize) -> Result<&DMatrix<f64>> {
        self.modes
            .get(k)
            .map(|m| &m.m)
            .ok_or_else(|| Error::Dimension(format!("mode index {k} out of range ({} modes)", self.modes.len())))
    }

    /// Deterministic uniform samples of `d` within each mode's bounds.
    pub fn scenario_gen(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::Config("scenario count must be at least 1".into()));
        }
        for m in &self.modes {
            if !(m.lo <= m.hi) {
                return Err(Error::Config(format!(
                    "mode {:?} has lo {} > hi {}",
                    m.name, m.lo, m.hi
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                self.modes
                    .iter()
                    .map(|m| {
                        let u: f64 = rng.random();
                        if m.lo == m.hi {
                            m.lo
                        } else {
                            m.lo + (m.hi - m.lo) * u
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

/// Synthetic droop-controlled network: `J0 = −L − 0.5 I + K`, where `L` is
/// the Laplacian of a random connected weighted graph and `K` is a
/// skew-symmetric coupling on the same edges. One mode `M_k = −e_b e_bᵀ` per
/// battery bus `b` scales the local damping by the gain.
///
/// The defaults describe a network after elimination of its passive buses:
/// every pair of nodes is coupled, dissipation along lines is weak and the
/// lossless exchange (`K`) dominates, giving lightly damped oscillatory
/// modes. `K` leaves `J + Jᵀ = −2L − I` untouched, so every member of the
/// family is stable; with `skew = 0` the Jacobian is symmetric.
#[derive(Debug, Clone)]
pub struct DroopGrid {
    pub nodes: usize,
    pub battery_buses: Vec<usize>,
    pub seed: u64,
    /// Probability of an edge beyond the random spanning tree.
    pub edge_prob: f64,
    /// Scale of the dissipative (Laplacian) edge weights.
    pub weight_scale: f64,
    /// Scale of the skew-symmetric edge coupling.
    pub skew: f64,
    pub gain_range: (f64, f64),
}

impl DroopGrid {
    pub const DEFAULT_EDGE_PROB: f64 = 1.0;
    pub const DEFAULT_WEIGHT_SCALE: f64 = 0.02;
    pub const DEFAULT_SKEW: f64 = 3.0;

    /// `p` battery buses spread evenly over an `nodes`-bus network.
    pub fn new(nodes: usize, p: usize, seed: u64) -> DroopGrid {
        let battery_buses = (0..p)
            .map(|k| (k * nodes) / p.max(1) + nodes / (2 * p.max(1)))
            .collect();
        DroopGrid {
            nodes,
            battery_buses,
            seed,
            edge_prob: Self::DEFAULT_EDGE_PROB,
            weight_scale: Self::DEFAULT_WEIGHT_SCALE,
            skew: Self::DEFAULT_SKEW,
            gain_range: (0.1, 2.0),
        }
    }

    pub fn symmetric(mut self) -> DroopGrid {
        self.skew = 0.0;
        self
    }

    pub fn build(&self) -> Result<ParametricJacobian> {
        let n = self.nodes;
        if n == 0 {
            return Err(Error::Config("droop grid needs at least one node".into()));
        }
        if let Some(b) = self.battery_buses.iter().find(|&&b| b >= n) {
            return Err(Error::Config(format!("battery bus {b} outside a {n}-node grid")));
        }
        for (name, v) in [("skew", self.skew), ("weight_scale", self.weight_scale)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Config(format!(
                "edge_prob must lie in [0, 1], got {}",
                self.edge_prob
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w = DMatrix::<f64>::zeros(n, n);
        let mut k = DMatrix::<f64>::zeros(n, n);
        let add_edge = |w: &mut DMatrix<f64>, k: &mut DMatrix<f64>, rng: &mut ChaCha8Rng, i: usize, j: usize| {
            let base = self.weight_scale * (0.5 + rng.random::<f64>());
            let exchange = self.skew * (0.5 + rng.random::<f64>()) * (2.0 * rng.random::<f64>() - 1.0);
            w[(i, j)] = base;
            w[(j, i)] = base;
            k[(i, j)] = exchange;
            k[(j, i)] = -exchange;
        };
        // Random spanning tree keeps the graph connected.
        for i in 1..n {
            let j = rng.random_range(0..i);
            add_edge(&mut w, &mut k, &mut rng, i, j);
        }
        for i in 0..n {
            for j in i + 1..n {
                if w[(i, j)] == 0.0 && rng.random::<f64>() < self.edge_prob {
                    add_edge(&mut w, &mut k, &mut rng, i, j);
                }
            }
        }
        let mut j0 = k - &w;
        for i in 0..n {
            let degree: f64 = w.row(i).sum();
            j0[(i, i)] = -degree - 0.5;
        }
        let modes = self
            .battery_buses
            .iter()
            .map(|&b| {
                let mut m = DMatrix::zeros(n, n);
                m[(b, b)] = -1.0;
                Mode {
                    name: format!("Kb{b}"),
                    m,
                    lo: self.gain_range.0,
                    hi: self.gain_range.1,
                }
            })
            .collect();
        ParametricJacobian::new(j0, modes)
    }
}
