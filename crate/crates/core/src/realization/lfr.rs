use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frf::{FrequencyGrid, FrfResponse};
use crate::linalg::StateSpace;
use crate::obf::{realize_bank, SchedulingBasis};
use crate::synthesis::ControllerParameters;

/// LPV controller `K_p = N_K D_K^{-1}` as an upper fractional transformation
/// of an LTI interconnection and the scheduling block
/// `diag(psi(p), psi(p))`.
///
/// The interconnection has inputs `[w_N; w_D; e]` and outputs
/// `[z_N; z_D; u]` (`m` scheduling channels each). Its states stack the
/// `N_K` bank and the `D_K` bank. The inverse of `D_K` is realized by
/// feeding the strictly proper part of the `D_K` bank back around the unit
/// feedthrough `phi_0 = 1`:
///
/// ```text
/// eta  = e - sum_l w_D,l
/// z_N,l = sum_i w[i][l] (C_N x_N + D_N eta)_i
/// z_D,l = sum_{i>=1} v[i][l] (C_D x_D)_i
/// u    = sum_l w_N,l
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LfrController {
    interconnection: StateSpace,
    scheduling: SchedulingBasis,
    n_states: usize,
    n_n: usize,
}

impl LfrController {
    pub fn interconnection(&self) -> &StateSpace {
        &self.interconnection
    }

    pub fn states(&self) -> usize {
        self.n_states
    }

    /// Scheduling channels per block (`m`).
    pub fn scheduling_channels(&self) -> usize {
        self.scheduling.len()
    }

    pub fn scheduling(&self) -> &SchedulingBasis {
        &self.scheduling
    }

    /// Number of states belonging to the `N_K` bank.
    pub fn numerator_states(&self) -> usize {
        self.n_n
    }

    /// `Delta(p) = diag(psi(p), psi(p))`.
    pub fn delta(&self, p: f64) -> Result<DMatrix<f64>> {
        let psi = self.scheduling.eval(p)?;
        let m = psi.len();
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        for (l, &v) in psi.iter().enumerate() {
            d[(l, l)] = v;
            d[(m + l, m + l)] = v;
        }
        Ok(d)
    }

    /// LTI realization of the controller frozen at `p`.
    pub fn frozen(&self, p: f64) -> Result<StateSpace> {
        self.interconnection.upper_lft(&self.delta(p)?)
    }

    /// Zero initial state.
    pub fn initial_state(&self) -> DVector<f64> {
        DVector::zeros(self.n_states)
    }

    /// One sample of the scheduled controller: returns `u_k` and advances
    /// `x` using `e_k` and `p_k`.
    pub fn step(&self, x: &mut DVector<f64>, e: f64, p: f64) -> Result<f64> {
        let psi = self.scheduling.eval(p)?;
        let m = psi.len();
        let ic = &self.interconnection;
        // z_D does not depend on w; resolve it first, then w_D, then z_N.
        let mut w = DVector::zeros(2 * m + 1);
        w[2 * m] = e;
        for l in 0..m {
            let z_d = (ic.c.row(m + l) * &*x)[0];
            w[m + l] = psi[l] * z_d;
        }
        for l in 0..m {
            let z_n = (ic.c.row(l) * &*x)[0] + (ic.d.row(l) * &w)[0];
            w[l] = psi[l] * z_n;
        }
        let u = (ic.c.row(2 * m) * &*x)[0] + (ic.d.row(2 * m) * &w)[0];
        let next = &ic.a * &*x + &ic.b * &w;
        *x = next;
        Ok(u)
    }
}

/// Builds the LFR of the controller described by `theta`.
pub fn build_lfr(theta: &ControllerParameters) -> Result<LfrController> {
    let m = theta.m();
    let v0_ok = theta.v[0].iter().enumerate().all(|(l, &c)| c == if l == 0 { 1.0 } else { 0.0 });
    if !v0_ok {
        return Err(Error::invalid(
            "D_K feedthrough must be identically one (normalization v[0] = [1, 0, ...]) to be invertible",
        ));
    }
    let bank_n = realize_bank(&theta.basis_n)?.ss;
    let bank_d = realize_bank(&theta.basis_d)?.ss;
    // The inversion below requires phi_i, i >= 1, to be strictly proper.
    if (1..bank_d.outputs()).any(|i| bank_d.d[(i, 0)] != 0.0) {
        return Err(Error::Numerical("D_K basis functions beyond phi_0 must be strictly proper".into()));
    }
    let (nn, nd) = (bank_n.states(), bank_d.states());
    let nx = nn + nd;
    let ni = 2 * m + 1;
    let no = 2 * m + 1;
    let e_col = 2 * m;

    // eta = e - sum_l w_D,l expressed as a row over the inputs.
    let mut eta = DMatrix::<f64>::zeros(1, ni);
    eta[(0, e_col)] = 1.0;
    for l in 0..m {
        eta[(0, m + l)] = -1.0;
    }

    let mut a = DMatrix::zeros(nx, nx);
    a.view_mut((0, 0), (nn, nn)).copy_from(&bank_n.a);
    a.view_mut((nn, nn), (nd, nd)).copy_from(&bank_d.a);
    let mut b = DMatrix::zeros(nx, ni);
    b.view_mut((0, 0), (nn, ni)).copy_from(&(&bank_n.b * &eta));
    b.view_mut((nn, 0), (nd, ni)).copy_from(&(&bank_d.b * &eta));

    let mut c = DMatrix::zeros(no, nx);
    let mut d = DMatrix::zeros(no, ni);
    for l in 0..m {
        for (i, row) in theta.w.iter().enumerate() {
            let g = row[l];
            if g == 0.0 {
                continue;
            }
            for j in 0..nn {
                c[(l, j)] += g * bank_n.c[(i, j)];
            }
            for j in 0..ni {
                d[(l, j)] += g * bank_n.d[(i, 0)] * eta[(0, j)];
            }
        }
        for (i, row) in theta.v.iter().enumerate().skip(1) {
            let g = row[l];
            for j in 0..nd {
                c[(m + l, nn + j)] += g * bank_d.c[(i, j)];
            }
        }
        d[(2 * m, l)] = 1.0;
    }
    let interconnection = StateSpace::new(a, b, c, d)?;
    Ok(LfrController {
        interconnection,
        scheduling: theta.scheduling.clone(),
        n_states: nx,
        n_n: nn,
    })
}

/// Frequency response of the controller frozen at `p`.
pub fn frozen_controller_frf(ctrl: &LfrController, p: f64, grid: &Arc<FrequencyGrid>) -> Result<FrfResponse> {
    let ss = ctrl.frozen(p)?;
    let values = ss.freq_response(0, 0, grid.omegas())?;
    FrfResponse::new(values, grid.clone())
}
