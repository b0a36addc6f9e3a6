use serde::{Deserialize, Serialize};

use super::constraints::{assemble_constraints, ConstraintSet};
use super::params::ControllerParameters;
use super::problem::SynthesisProblem;
use super::solve::{feasibility_solve_inflated, problem_equalities, Feasibility};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BisectionMode {
    /// Arithmetic midpoint; stop when `hi - lo <= tol`.
    Absolute,
    /// Geometric midpoint; stop when `hi / lo <= 1 + tol`.
    Relative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectionOutcome {
    /// Smallest value found feasible.
    pub hi: f64,
    /// Largest value found infeasible (or the initial lower bound).
    pub lo: f64,
    /// Midpoint evaluations, not counting the initial check at `hi`.
    pub iterations: usize,
}

/// Bisection on a monotone predicate (`feasible(g)` implies `feasible(g')` for `g' >= g`).
pub fn bisect(
    lo: f64,
    hi: f64,
    tol: f64,
    mode: BisectionMode,
    mut feasible: impl FnMut(f64) -> Result<bool>,
) -> Result<BisectionOutcome> {
    if !(hi > lo) || !(tol > 0.0) || (mode == BisectionMode::Relative && !(lo > 0.0)) {
        return Err(Error::invalid(format!("invalid bisection bracket [{lo}, {hi}] / tolerance {tol}")));
    }
    if !feasible(hi)? {
        return Err(Error::Infeasible(format!("infeasible at the upper bound {hi}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    loop {
        let done = match mode {
            BisectionMode::Absolute => hi - lo <= tol,
            BisectionMode::Relative => hi / lo <= 1.0 + tol,
        };
        if done {
            break;
        }
        let mid = match mode {
            BisectionMode::Absolute => 0.5 * (lo + hi),
            BisectionMode::Relative => (lo * hi).sqrt(),
        };
        iterations += 1;
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BisectionOutcome { hi, lo, iterations })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub bisection_iterations: usize,
    pub solves: usize,
    pub solver_iterations: u64,
    /// Solves that ended in a numerical failure; treated as infeasible.
    pub solver_failures: usize,
    pub last_failure: Option<String>,
}

/// Outcome of [`bisect_gamma`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub params: ControllerParameters,
    pub gamma: f64,
    pub eps: f64,
    /// `Re{D_p} - eps - |W_c N_p^c| / gamma`, ordered by operating point,
    /// then frequency, then channel (`S`, `SG`, `KS`, `T`).
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// `max |W_c N_p^c / D_p|` over the grid.
    pub achieved_gamma: f64,
    pub telemetry: Telemetry,
}

impl SynthesisResult {
    pub fn margin(&self, p_index: usize, omega_index: usize, channel: usize, n_omega: usize) -> f64 {
        self.margins[(p_index * n_omega + omega_index) * 4 + channel]
    }
}

/// Solves the feasibility problem at one gamma and packages a result.
pub fn solve_at_gamma(problem: &SynthesisProblem, gamma: f64) -> Result<Option<SynthesisResult>> {
    let cons = assemble_constraints(problem, gamma)?;
    let eqs = problem_equalities(problem)?;
    let mut tel = Telemetry::default();
    let f = run(&cons, &eqs, problem, &mut tel)?;
    f.map(|theta| package(problem, &cons, theta, tel)).transpose()
}

fn run(
    cons: &ConstraintSet,
    eqs: &super::solve::EqualitySet,
    problem: &SynthesisProblem,
    tel: &mut Telemetry,
) -> Result<Option<Vec<f64>>> {
    tel.solves += 1;
    match feasibility_solve_inflated(cons, eqs, problem.options.eps_inflation) {
        Ok(Feasibility::Feasible { theta, iterations, .. }) => {
            tel.solver_iterations += iterations as u64;
            Ok(Some(theta))
        }
        Ok(Feasibility::Infeasible { iterations, .. }) => {
            tel.solver_iterations += iterations as u64;
            Ok(None)
        }
        Err(Error::Solver(msg)) => {
            tel.solver_failures += 1;
            tel.last_failure = Some(msg);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn package(problem: &SynthesisProblem, cons: &ConstraintSet, theta: Vec<f64>, telemetry: Telemetry) -> Result<SynthesisResult> {
    let params = ControllerParameters::from_vector(
        &theta,
        problem.basis_n.clone(),
        problem.basis_d.clone(),
        problem.scheduling_basis.clone(),
    )?;
    let x = params.to_vector();
    let margins = cons.margins(&x);
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SynthesisResult {
        achieved_gamma: cons.max_weighted_gain(&x),
        params,
        gamma: cons.gamma,
        eps: cons.eps,
        margins,
        min_margin,
        telemetry,
    })
}

/// Smallest gamma (to the relative tolerance) for which the gridded
/// synthesis condition is feasible, with the corresponding parameters.
pub fn bisect_gamma(problem: &SynthesisProblem) -> Result<SynthesisResult> {
    let base = assemble_constraints(problem, 1.0)?;
    let eqs = problem_equalities(problem)?;
    let mut tel = Telemetry::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let (lo, hi) = problem.options.gamma_bounds;
    let outcome = bisect(lo, hi, problem.options.tolerance, BisectionMode::Relative, |g| {
        let cons = base.at_gamma(g);
        match run(&cons, &eqs, problem, &mut tel)? {
            Some(theta) => {
                if best.as_ref().is_none_or(|(bg, _)| g < *bg) {
                    best = Some((g, theta));
                }
                Ok(true)
            }
            None => Ok(false),
        }
    })
    .map_err(|e| match e {
        Error::Infeasible(m) => {
            Error::Infeasible(format!("{m}; consider relaxing the weights or raising the upper gamma bound"))
        }
        other => other,
    })?;
    tel.bisection_iterations = outcome.iterations;
    let (gamma, theta) = best.ok_or_else(|| Error::Solver("bisection finished without a feasible point".into()))?;
    let mut res = package(problem, &base.at_gamma(gamma), theta, tel)?;
    if res.min_margin < 0.0 {
        return Err(Error::Numerical(format!(
            "returned parameters violate the constraints (margin {:.3e})",
            res.min_margin
        )));
    }
    res.gamma = gamma;
    Ok(res)
}
