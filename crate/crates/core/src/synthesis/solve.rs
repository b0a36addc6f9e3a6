use super::constraints::ConstraintSet;
use super::problem::SynthesisProblem;
use crate::error::{Error, Result};
use crate::factorization::Channel;
use crate::socp::{Affine, ConeProgram, SolveStatus};

/// Linear equalities `a . x = b` over the decision vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EqualitySet {
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl EqualitySet {
    pub fn push(&mut self, a: Vec<f64>, b: f64) {
        self.rows.push((a, b));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(a, b)| (a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    /// Row-echelon reduction with partial pivoting. Dependent rows are
    /// dropped; an inconsistent system is reported as infeasible.
    pub fn reduced(&self) -> Result<EqualitySet> {
        let mut rows: Vec<(Vec<f64>, f64)> = self.rows.clone();
        let n = rows.first().map(|r| r.0.len()).unwrap_or(0);
        let scale = rows
            .iter()
            .flat_map(|r| r.0.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
            .max(1.0);
        let tol = 1e-10 * scale;
        let mut out = Vec::new();
        let mut col = 0;
        while !rows.is_empty() && col < n {
            let (piv, val) = rows
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.0[col].abs()))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            if val <= tol {
                col += 1;
                continue;
            }
            let pr = rows.swap_remove(piv);
            for r in rows.iter_mut() {
                let f = r.0[col] / pr.0[col];
                if f != 0.0 {
                    for j in col..n {
                        r.0[j] -= f * pr.0[j];
                    }
                    r.1 -= f * pr.1;
                }
            }
            out.push(pr);
            col += 1;
        }
        for r in &rows {
            if r.1.abs() > 1e-9 * scale.max(1.0) {
                return Err(Error::Infeasible(format!(
                    "contradictory equality constraints (residual {:.3e})",
                    r.1
                )));
            }
        }
        Ok(EqualitySet { rows: out })
    }
}

/// `v[0] = [1, 0, ..., 0]`.
pub fn normalization_equalities(problem: &SynthesisProblem) -> EqualitySet {
    let n = problem.n_vars();
    let mut eq = EqualitySet::default();
    for l in 0..problem.scheduling_basis.len() {
        let mut a = vec![0.0; n];
        a[problem.index_v(0, l)] = 1.0;
        eq.push(a, if l == 0 { 1.0 } else { 0.0 });
    }
    eq
}

/// Normalization plus `D_K(1, p_tau) = sum_i v_i(p_tau) phi_i(1) = 0` for
/// every operating point, which places a controller pole at `z = 1`.
pub fn add_integral_action(problem: &SynthesisProblem) -> Result<EqualitySet> {
    if problem.grid.omegas()[0] <= 0.0 {
        return Err(Error::invalid(
            "integral action needs a constraint grid that excludes omega = 0",
        ));
    }
    let mut eq = normalization_equalities(problem);
    let phi1 = problem.basis_d.eval_at(num_complex::Complex64::new(1.0, 0.0));
    let n = problem.n_vars();
    for &p in problem.scheduling.points() {
        let psi = problem.scheduling_basis.eval(p)?;
        let mut a = vec![0.0; n];
        for (i, ph) in phi1.iter().enumerate() {
            for (l, &ps) in psi.iter().enumerate() {
                a[problem.index_v(i, l)] += ph.re * ps;
            }
        }
        eq.push(a, 0.0);
    }
    eq.reduced().map_err(|e| match e {
        Error::Infeasible(m) => Error::Infeasible(format!(
            "integral action conflicts with the D_K normalization ({m}); a D_K basis of order >= 1 is required"
        )),
        other => other,
    })
}

/// Equalities implied by the problem options.
pub fn problem_equalities(problem: &SynthesisProblem) -> Result<EqualitySet> {
    if problem.options.integral_action {
        add_integral_action(problem)
    } else {
        Ok(normalization_equalities(problem))
    }
}

/// Result of one cone feasibility problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    /// `theta` satisfies every constraint with the recorded minimum margin.
    Feasible { theta: Vec<f64>, margin: f64, iterations: u32 },
    /// No strictly feasible point; `margin` is the best value found, if any.
    Infeasible { margin: Option<f64>, iterations: u32 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Maximizes a common margin `t <= 1` in
/// `|W_c N_p^c| / gamma <= Re{D_p} - k eps - t` subject to the equalities,
/// then verifies the returned point directly against the unmodified
/// constraints (`k` is the eps inflation factor).
pub fn feasibility_solve(constraints: &ConstraintSet, equalities: &EqualitySet) -> Result<Feasibility> {
    feasibility_solve_inflated(constraints, equalities, 2.0)
}

pub fn feasibility_solve_inflated(
    constraints: &ConstraintSet,
    equalities: &EqualitySet,
    eps_inflation: f64,
) -> Result<Feasibility> {
    let eqs = equalities.reduced()?;
    let n = constraints.n_vars;
    let t = n;
    let mut cp = ConeProgram::new(n + 1);
    cp.set_objective(t, -1.0);
    cp.add_nonneg(Affine::new(vec![(t, -1.0)], 1.0));
    for (a, b) in &eqs.rows {
        if a.len() != n {
            return Err(Error::invalid("equality row length differs from the decision vector"));
        }
        cp.add_eq(Affine::dense(a, -b));
    }
    let g = constraints.gamma;
    let eps_solve = constraints.eps * eps_inflation;
    for blk in &constraints.blocks {
        let head: Vec<f64> = blk.d.iter().map(|c| c.re).collect();
        let head = Affine::dense(&head, -eps_solve).with_term(t, -1.0);
        for c in Channel::ALL {
            let coefs = &blk.n[c.index()];
            let re: Vec<f64> = coefs.iter().map(|v| v.re / g).collect();
            let im: Vec<f64> = coefs.iter().map(|v| v.im / g).collect();
            cp.add_soc(head.clone(), vec![Affine::dense(&re, 0.0), Affine::dense(&im, 0.0)]);
        }
    }
    let out = cp.solve()?;
    match out.status {
        SolveStatus::Infeasible => Ok(Feasibility::Infeasible { margin: None, iterations: out.iterations }),
        status => {
            let x = &out.x[..n];
            if x.iter().any(|v| !v.is_finite()) {
                return match status {
                    SolveStatus::Failed(msg) => Err(Error::Solver(msg)),
                    _ => Err(Error::Solver("solver returned non-finite parameters".into())),
                };
            }
            let margin = constraints.min_margin(x);
            let eq_ok = eqs.max_residual(x) <= 1e-7 * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
            if margin >= 0.0 && eq_ok {
                Ok(Feasibility::Feasible { theta: x.to_vec(), margin, iterations: out.iterations })
            } else if let SolveStatus::Failed(msg) = status {
                Err(Error::Solver(format!("{msg} (best margin {margin:.3e})")))
            } else {
                Ok(Feasibility::Infeasible { margin: Some(margin), iterations: out.iterations })
            }
        }
    }
}
