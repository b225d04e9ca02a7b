use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Lu;

/// Reciprocal-condition threshold below which `D` is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Small-signal DAE `[ẋ; 0] = [A B; C D] [x; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl DescriptorSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        let ny = d.nrows();
        let ok = a.ncols() == nx
            && nx > 0
            && d.ncols() == ny
            && b.nrows() == nx
            && b.ncols() == ny
            && c.nrows() == ny
            && c.ncols() == nx;
        if !ok {
            return Err(Error::Dimension(format!(
                "inconsistent descriptor blocks: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(DescriptorSystem { a, b, c, d })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_algebraic(&self) -> usize {
        self.d.nrows()
    }
}

/// Eliminates the algebraic variables: `J = A − B D⁻¹ C`, via an LU solve.
pub fn reduce(sys: &DescriptorSystem) -> Result<DMatrix<f64>> {
    if sys.n_algebraic() == 0 {
        return Ok(sys.a.clone());
    }
    let lu = Lu::factor(&sys.d);
    let rcond = lu.rcond();
    if rcond < SINGULAR_RCOND {
        return Err(Error::SingularAlgebraicBlock { rcond });
    }
    // D⁻¹C column by column.
    let mut dinv_c = sys.c.clone();
    for mut col in dinv_c.column_iter_mut() {
        let mut buf: Vec<f64> = col.iter().copied().collect();
        lu.solve_in_place(&mut buf);
        col.iter_mut().zip(buf).for_each(|(c, v)| *c = v);
    }
    Ok(&sys.a - &sys.b * dinv_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn scalar_reduction() {
        let sys = DescriptorSystem::new(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), m(1, 1, &[-2.0])).unwrap();
        let j = reduce(&sys).unwrap();
        assert!((j[(0, 0)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_returns_a() {
        let a = m(2, 2, &[-1.0, 0.3, 0.2, -2.0]);
        let sys = DescriptorSystem::new(
            a.clone(),
            DMatrix::zeros(2, 3),
            m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DMatrix::identity(3, 3) * 2.0,
        )
        .unwrap();
        assert_eq!(reduce(&sys).unwrap(), a);
        let sys =
            DescriptorSystem::new(a.clone(), m(2, 1, &[1.0, 1.0]), DMatrix::zeros(1, 2), m(1, 1, &[3.0])).unwrap();
        assert_eq!(reduce(&sys).unwrap(), a);
    }

    #[test]
    fn matches_explicit_inverse() {
        let mut s = 11u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(4, 4, |_, _| next());
        let b = DMatrix::from_fn(4, 2, |_, _| next());
        let c = DMatrix::from_fn(2, 4, |_, _| next());
        let d = DMatrix::from_fn(2, 2, |_, _| next()) + DMatrix::identity(2, 2) * 2.0;
        let oracle = &a - &b * d.clone().try_inverse().unwrap() * &c;
        let sys = DescriptorSystem::new(a, b, c, d).unwrap();
        assert!((reduce(&sys).unwrap() - oracle).amax() < 1e-13);
    }

    #[test]
    fn singular_d_is_rejected() {
        let sys = DescriptorSystem::new(
            m(1, 1, &[-1.0]),
            m(1, 2, &[1.0, 1.0]),
            m(2, 1, &[1.0, 1.0]),
            m(2, 2, &[1.0, 2.0, 2.0, 4.0]),
        )
        .unwrap();
        assert!(matches!(reduce(&sys), Err(Error::SingularAlgebraicBlock { .. })));
    }

    #[test]
    fn inconsistent_blocks_are_rejected() {
        let r = DescriptorSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }
}
