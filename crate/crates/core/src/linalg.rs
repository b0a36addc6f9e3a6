//! Discrete-time state-space models and frequency-domain evaluation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `x+ = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::invalid(format!(
                "inconsistent state-space dimensions: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
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
        Ok(Self { a, b, c, d })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `C (zI - A)^{-1} B + D`, evaluated by an LU solve.
    pub fn resolvent(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.states();
        let dc = self.d.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return Ok(dc);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let id = if i == j { z } else { Complex64::new(0.0, 0.0) };
            id - self.a[(i, j)]
        });
        let bc = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m
            .lu()
            .solve(&bc)
            .ok_or_else(|| Error::Numerical(format!("zI - A singular at z = {z}")))?;
        let cc = self.c.map(|v| Complex64::new(v, 0.0));
        Ok(cc * x + dc)
    }

    /// Frequency response of output `row` to input `col` on `e^{i omega}`.
    pub fn freq_response(&self, row: usize, col: usize, omegas: &[f64]) -> Result<Vec<Complex64>> {
        omegas
            .iter()
            .map(|&w| Ok(self.resolvent(Complex64::from_polar(1.0, w))?[(row, col)]))
            .collect()
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// Closes the upper fractional transformation `F_u(M, Delta)`.
    ///
    /// The first `nw` inputs and first `nz` outputs of `self` are the
    /// scheduling channels (`w = Delta z`); the remaining ones are external.
    pub fn upper_lft(&self, delta: &DMatrix<f64>) -> Result<StateSpace> {
        let nw = delta.nrows();
        let nz = delta.ncols();
        if nw > self.inputs() || nz > self.outputs() {
            return Err(Error::invalid("scheduling block larger than the interconnection"));
        }
        let ne = self.inputs() - nw;
        let ny = self.outputs() - nz;
        let n = self.states();
        let b1 = self.b.columns(0, nw).into_owned();
        let b2 = self.b.columns(nw, ne).into_owned();
        let c1 = self.c.rows(0, nz).into_owned();
        let c2 = self.c.rows(nz, ny).into_owned();
        let d11 = self.d.view((0, 0), (nz, nw)).into_owned();
        let d12 = self.d.view((0, nw), (nz, ne)).into_owned();
        let d21 = self.d.view((nz, 0), (ny, nw)).into_owned();
        let d22 = self.d.view((nz, nw), (ny, ne)).into_owned();
        // w = Delta z, z = C1 x + D11 w + D12 e  =>  w = (I - Delta D11)^{-1} Delta (C1 x + D12 e)
        let lhs = DMatrix::<f64>::identity(nw, nw) - delta * &d11;
        let lu = lhs.lu();
        let gain = lu
            .solve(delta)
            .ok_or_else(|| Error::Numerical("ill-posed fractional transformation".into()))?;
        let wx = &gain * &c1;
        let we = &gain * &d12;
        let a = &self.a + &b1 * &wx;
        let b = &b2 + &b1 * &we;
        let c = &c2 + &d21 * &wx;
        let d = &d22 + &d21 * &we;
        debug_assert_eq!(a.nrows(), n);
        StateSpace::new(a, b, c, d)
    }
}
