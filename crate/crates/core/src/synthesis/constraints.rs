use num_complex::Complex64;

use super::problem::SynthesisProblem;
use crate::error::{Error, Result};
use crate::factorization::Channel;
use crate::obf::eval_basis;

/// Data at one `(omega_k, p_tau)`: coefficient vectors (over the decision
/// vector) of `D_p` and of the weighted numerators `W_c N_p^c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintBlock {
    pub omega_index: usize,
    pub p_index: usize,
    pub d: Vec<Complex64>,
    /// Indexed by [`Channel::index`].
    pub n: [Vec<Complex64>; 4],
}

/// Cone constraints `Re{D_p} >= |W_c N_p^c| / gamma + eps`, one per
/// `(omega, p, channel)`, all linear in the decision vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub gamma: f64,
    pub eps: f64,
    pub n_vars: usize,
    pub blocks: Vec<ConstraintBlock>,
}

fn dot(c: &[Complex64], x: &[f64]) -> Complex64 {
    c.iter().zip(x).map(|(a, &b)| a * b).sum()
}

impl ConstraintSet {
    /// Number of scalar cone constraints.
    pub fn count(&self) -> usize {
        self.blocks.len() * 4
    }

    /// Constraint values `Re{D_p} - eps - |W_c N_p^c| / gamma` in block-major,
    /// channel-minor order. All entries are non-negative exactly when the
    /// decision vector `x` satisfies the constraints.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count());
        for b in &self.blocks {
            let re_d = dot(&b.d, x).re;
            for c in Channel::ALL {
                out.push(re_d - self.eps - dot(&b.n[c.index()], x).norm() / self.gamma);
            }
        }
        out
    }

    pub fn min_margin(&self, x: &[f64]) -> f64 {
        self.margins(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `min Re{D_p}` over all blocks.
    pub fn min_re_d(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| dot(&b.d, x).re).fold(f64::INFINITY, f64::min)
    }

    /// `max |W_c N_p^c / D_p|` over all blocks and channels.
    pub fn max_weighted_gain(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let d = dot(&b.d, x);
            for c in Channel::ALL {
                worst = worst.max(dot(&b.n[c.index()], x).norm() / d.norm());
            }
        }
        worst
    }

    /// The same constraints at another gamma.
    pub fn at_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }
}

/// Grids the synthesis condition over all frequencies, operating points and channels.
pub fn assemble_constraints(problem: &SynthesisProblem, gamma: f64) -> Result<ConstraintSet> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let grid = &problem.grid;
    let phi_n = eval_basis(&problem.basis_n, grid);
    let phi_d = eval_basis(&problem.basis_d, grid);
    let weights = problem.weights.eval(grid)?;
    let m = problem.scheduling_basis.len();
    let n_vars = problem.n_vars();
    let zero = Complex64::new(0.0, 0.0);
    let mut blocks = Vec::with_capacity(grid.len() * problem.scheduling.len());
    for (pi, &p) in problem.scheduling.points().iter().enumerate() {
        let psi = problem.scheduling_basis.eval(p)?;
        let pair = &problem.pairs[pi];
        if pair.n_g.len() != grid.len() {
            return Err(Error::GridMismatch(format!("data at p = {p} do not match the grid")));
        }
        for k in 0..grid.len() {
            let ng = pair.n_g.values()[k];
            let dg = pair.d_g.values()[k];
            let mut d = vec![zero; n_vars];
            let mut n = [vec![zero; n_vars], vec![zero; n_vars], vec![zero; n_vars], vec![zero; n_vars]];
            for i in 0..problem.basis_n.len() {
                for (l, &ps) in psi.iter().enumerate() {
                    let j = problem.index_w(i, l);
                    let base = phi_n[(i, k)] * ps;
                    d[j] += ng * base;
                    n[Channel::KS.index()][j] = weights[Channel::KS.index()][k] * dg * base;
                    n[Channel::T.index()][j] = weights[Channel::T.index()][k] * ng * base;
                }
            }
            for i in 0..problem.basis_d.len() {
                for (l, &ps) in psi.iter().enumerate() {
                    let j = problem.index_v(i, l);
                    let base = phi_d[(i, k)] * ps;
                    d[j] += dg * base;
                    n[Channel::S.index()][j] = weights[Channel::S.index()][k] * dg * base;
                    n[Channel::SG.index()][j] = weights[Channel::SG.index()][k] * ng * base;
                }
            }
            debug_assert_eq!(m, psi.len());
            blocks.push(ConstraintBlock { omega_index: k, p_index: pi, d, n });
        }
    }
    Ok(ConstraintSet { gamma, eps: problem.eps(), n_vars, blocks })
}
