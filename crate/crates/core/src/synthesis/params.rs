use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FrequencyGrid;
use crate::obf::{eval_basis, ObfBasis, SchedulingBasis};
use crate::poly;
use crate::rational::RationalTf;

/// Controller coefficients: `w[i][l]` multiplies `psi_l(p) phi_i(z)` in `N_K`,
/// `v[i][l]` does the same in `D_K`. `v[0] = [1, 0, ..., 0]` so that the
/// constant term of `D_K` is one at every operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParameters {
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub basis_n: ObfBasis,
    pub basis_d: ObfBasis,
    pub scheduling: SchedulingBasis,
}

impl ControllerParameters {
    pub fn new(
        w: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        basis_n: ObfBasis,
        basis_d: ObfBasis,
        scheduling: SchedulingBasis,
    ) -> Result<Self> {
        let m = scheduling.len();
        let shape_ok = |t: &Vec<Vec<f64>>, rows: usize| t.len() == rows && t.iter().all(|r| r.len() == m);
        if !shape_ok(&w, basis_n.len()) || !shape_ok(&v, basis_d.len()) {
            return Err(Error::invalid(format!(
                "coefficient shapes must be {}x{m} and {}x{m}",
                basis_n.len(),
                basis_d.len()
            )));
        }
        if w.iter().chain(v.iter()).flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("controller coefficients must be finite"));
        }
        let normalized = v[0].iter().enumerate().all(|(l, &c)| (c - if l == 0 { 1.0 } else { 0.0 }).abs() <= 1e-9);
        if !normalized {
            return Err(Error::invalid(format!(
                "normalization violated: leading D_K coefficients are {:?}, expected [1, 0, ...]",
                v[0]
            )));
        }
        Ok(Self { w, v, basis_n, basis_d, scheduling })
    }

    /// `K = 0`: `N_K = 0`, `D_K = 1`.
    pub fn zero(basis_n: ObfBasis, basis_d: ObfBasis, scheduling: SchedulingBasis) -> Self {
        let m = scheduling.len();
        let w = vec![vec![0.0; m]; basis_n.len()];
        let mut v = vec![vec![0.0; m]; basis_d.len()];
        v[0][0] = 1.0;
        Self { w, v, basis_n, basis_d, scheduling }
    }

    pub fn m(&self) -> usize {
        self.scheduling.len()
    }

    /// Number of scalar coefficients (the decision vector of synthesis).
    pub fn n_vars(&self) -> usize {
        layout_len(&self.basis_n, &self.basis_d, &self.scheduling)
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.w.iter().chain(self.v.iter()).flatten().copied().collect()
    }

    /// Inverse of [`to_vector`](Self::to_vector); the result is normalized-checked.
    pub fn from_vector(
        x: &[f64],
        basis_n: ObfBasis,
        basis_d: ObfBasis,
        scheduling: SchedulingBasis,
    ) -> Result<Self> {
        let m = scheduling.len();
        let nw = basis_n.len() * m;
        if x.len() < nw + basis_d.len() * m {
            return Err(Error::invalid("parameter vector too short"));
        }
        let w = x[..nw].chunks(m).map(|c| c.to_vec()).collect();
        let mut v: Vec<Vec<f64>> = x[nw..nw + basis_d.len() * m].chunks(m).map(|c| c.to_vec()).collect();
        // Snap the normalization row exactly; solvers return it to roundoff.
        for (l, c) in v[0].iter_mut().enumerate() {
            let want = if l == 0 { 1.0 } else { 0.0 };
            if (*c - want).abs() <= 1e-6 {
                *c = want;
            }
        }
        Self::new(w, v, basis_n, basis_d, scheduling)
    }

    /// `w_i(p)` for each `i`.
    pub fn w_at(&self, p: f64) -> Result<Vec<f64>> {
        let psi = self.scheduling.eval(p)?;
        Ok(self.w.iter().map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum()).collect())
    }

    /// `v_i(p)` for each `i`.
    pub fn v_at(&self, p: f64) -> Result<Vec<f64>> {
        let psi = self.scheduling.eval(p)?;
        Ok(self.v.iter().map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum()).collect())
    }

    /// Frozen rational form `K(z, p) = N_K / D_K`.
    pub fn frozen_controller(&self, p: f64, sample_rate: f64) -> Result<RationalTf> {
        let (nn, dn) = self.frozen_factor_polys(p)?;
        let (nd, dd) = self.frozen_d_polys(p)?;
        if self.basis_n.blocks() == self.basis_d.blocks() {
            RationalTf::new(nn, nd, sample_rate)
        } else {
            RationalTf::new(poly::mul(&nn, &dd), poly::mul(&dn, &nd), sample_rate)
        }
    }

    /// Numerator and common denominator of `N_K(., p)`.
    pub fn frozen_factor_polys(&self, p: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        combine(&self.basis_n, &self.w_at(p)?)
    }

    /// Numerator and common denominator of `D_K(., p)`.
    pub fn frozen_d_polys(&self, p: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        combine(&self.basis_d, &self.v_at(p)?)
    }
}

fn combine(basis: &ObfBasis, coefs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nums, den) = basis.rational_numerators();
    let mut acc = vec![0.0; den.len()];
    for (num, &c) in nums.iter().zip(coefs) {
        acc = poly::add(&acc, &poly::scale(num, c));
    }
    Ok((acc, den))
}

pub(crate) fn layout_len(basis_n: &ObfBasis, basis_d: &ObfBasis, sched: &SchedulingBasis) -> usize {
    (basis_n.len() + basis_d.len()) * sched.len()
}

/// `N_K(e^{i omega_k}, p)` and `D_K(e^{i omega_k}, p)` on the grid.
pub fn evaluate_factors(
    theta: &ControllerParameters,
    p: f64,
    grid: &FrequencyGrid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let phi_n = eval_basis(&theta.basis_n, grid);
    let phi_d = eval_basis(&theta.basis_d, grid);
    evaluate_factors_with(theta, p, &phi_n, &phi_d)
}

/// As [`evaluate_factors`] with pre-evaluated basis matrices.
pub fn evaluate_factors_with(
    theta: &ControllerParameters,
    p: f64,
    phi_n: &DMatrix<Complex64>,
    phi_d: &DMatrix<Complex64>,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let w = theta.w_at(p)?;
    let v = theta.v_at(p)?;
    let n = phi_n.ncols();
    let nk = (0..n)
        .map(|k| w.iter().enumerate().map(|(i, &c)| phi_n[(i, k)] * c).sum())
        .collect();
    let dk = (0..n)
        .map(|k| v.iter().enumerate().map(|(i, &c)| phi_d[(i, k)] * c).sum())
        .collect();
    Ok((nk, dk))
}
