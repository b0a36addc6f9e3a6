//! Gridded controller synthesis: cone constraints over the data, cone
//! feasibility solves and bisection over the performance level gamma.

mod bisect;
mod constraints;
mod params;
mod problem;
mod solve;
mod weights;

pub use bisect::{bisect, bisect_gamma, solve_at_gamma, BisectionMode, BisectionOutcome, SynthesisResult, Telemetry};
pub use constraints::{assemble_constraints, ConstraintBlock, ConstraintSet};
pub use params::{evaluate_factors, evaluate_factors_with, ControllerParameters};
pub use problem::{SynthesisOptions, SynthesisProblem};
pub use solve::{
    add_integral_action, feasibility_solve, feasibility_solve_inflated, normalization_equalities,
    problem_equalities, EqualitySet, Feasibility,
};
pub use weights::{Weight, WeightSet};
