//! Small second-order cone program builder on top of the Clarabel
//! interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

/// Sparse affine expression `sum coef_j x_j + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    /// From a dense coefficient vector, dropping exact zeros.
    pub fn dense(coefs: &[f64], constant: f64) -> Self {
        Self {
            terms: coefs.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, &c)| (j, c)).collect(),
            constant,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }

    pub fn with_term(mut self, j: usize, c: f64) -> Self {
        self.terms.push((j, c));
        self
    }
}

/// `min q^T x` subject to equalities, non-negativity of affine expressions
/// and second-order cones `||(e_1, ..., e_k)|| <= e_0`.
#[derive(Clone, Debug, Default)]
pub struct ConeProgram {
    n: usize,
    q: Vec<f64>,
    eq: Vec<Affine>,
    nonneg: Vec<Affine>,
    soc: Vec<Vec<Affine>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Solved,
    /// Reduced-accuracy solution; callers verify it directly.
    AlmostSolved,
    Infeasible,
    /// Iteration limit, numerical error and similar. `x` holds the last iterate.
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: u32,
    pub objective: f64,
}

impl ConeProgram {
    pub fn new(n: usize) -> Self {
        Self { n, q: vec![0.0; n], ..Default::default() }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.q[j] = c;
    }

    /// `e == 0`.
    pub fn add_eq(&mut self, e: Affine) {
        self.eq.push(e);
    }

    /// `e >= 0`.
    pub fn add_nonneg(&mut self, e: Affine) {
        self.nonneg.push(e);
    }

    /// `||(rest...)|| <= head`.
    pub fn add_soc(&mut self, head: Affine, rest: Vec<Affine>) {
        let mut v = Vec::with_capacity(rest.len() + 1);
        v.push(head);
        v.extend(rest);
        self.soc.push(v);
    }

    pub fn soc_count(&self) -> usize {
        self.soc.len()
    }

    pub fn solve(&self) -> Result<SolveOutcome> {
        let n = self.n;
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;
        // Slack convention s = b - A x: an expression e = a x + c maps to row -a, rhs c.
        let mut push = |e: &Affine, negate: bool, row: &mut usize| {
            for &(j, c) in &e.terms {
                if j >= n {
                    return Err(Error::invalid(format!("variable index {j} out of range")));
                }
                ri.push(*row);
                ci.push(j);
                vals.push(if negate { -c } else { c });
            }
            b.push(if negate { e.constant } else { -e.constant });
            *row += 1;
            Ok(())
        };
        for e in &self.eq {
            // a x + c = 0  =>  a x = -c
            push(e, false, &mut row)?;
        }
        if !self.eq.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eq.len()));
        }
        for e in &self.nonneg {
            push(e, true, &mut row)?;
        }
        if !self.nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.nonneg.len()));
        }
        for cone in &self.soc {
            for e in cone {
                push(e, true, &mut row)?;
            }
            cones.push(SupportedConeT::SecondOrderConeT(cone.len()));
        }
        let m = row;
        let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("setup: {e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Solved,
            SolverStatus::AlmostSolved => SolveStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            other => SolveStatus::Failed(format!("{other:?}")),
        };
        Ok(SolveOutcome { status, x: sol.x.clone(), iterations: sol.iterations, objective: sol.obj_val })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_socp() {
        // min s  s.t. ||(x - 3, y + 4)|| <= s, x + y = 0
        let mut cp = ConeProgram::new(3);
        cp.set_objective(2, 1.0);
        cp.add_eq(Affine::new(vec![(0, 1.0), (1, 1.0)], 0.0));
        cp.add_soc(
            Affine::new(vec![(2, 1.0)], 0.0),
            vec![Affine::new(vec![(0, 1.0)], -3.0), Affine::new(vec![(1, 1.0)], 4.0)],
        );
        let out = cp.solve().unwrap();
        assert_eq!(out.status, SolveStatus::Solved);
        // Projection of (3, -4) onto x + y = 0 is (3.5, -3.5), distance sqrt(0.5).
        assert!((out.x[0] - 3.5).abs() < 1e-6);
        assert!((out.x[2] - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn infeasible_equalities() {
        let mut cp = ConeProgram::new(1);
        cp.add_eq(Affine::new(vec![(0, 1.0)], -1.0));
        cp.add_nonneg(Affine::new(vec![(0, -1.0)], 0.0));
        let out = cp.solve().unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }
}
