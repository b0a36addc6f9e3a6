//! Data-driven synthesis of linear parameter-varying controllers from frozen
//! frequency response data.
//!
//! The crate covers the full pipeline: closed-loop frequency response
//! estimation on a surrogate plant, coprime-factor data, orthonormal basis
//! controller parameterizations, cone-programming synthesis with bisection
//! over the performance level, frequency-domain certificates, and an
//! executable fractional-representation controller with closed-loop
//! simulation.

pub mod analysis;
pub mod config;
pub mod error;
pub mod factorization;
pub mod frf;
pub mod linalg;
pub mod obf;
pub mod plant;
pub mod poly;
pub mod rational;
pub mod realization;
pub mod socp;
pub mod synthesis;
pub mod workflow;

pub use analysis::{
    check_performance, check_stability, compute_achieved_gamma, oracle_stability, AnalysisOptions, Certificate,
    CertificateStatus, MultiplierParameters, PointCertificate, Witness,
};
pub use error::{Error, Result};
pub use factorization::{
    assemble_closed_loop, coprime_from_closed_loop, BezoutWitness, Channel, ClosedLoopFactorData, CoprimeFrfPair,
};
pub use frf::{
    closed_loop_to_plant, etfe_estimate, load_dataset, save_dataset, FrequencyGrid, FrfDataset, FrfResponse,
    SchedulingGrid, TimeRecord, Window,
};
pub use linalg::StateSpace;
pub use obf::{eval_basis, laguerre_basis, BasisBlock, ObfBasis, SchedulingBasis, SchedulingKind};
pub use plant::{generate_experiment, Experiment, ExperimentOptions, LpvSurrogateModel, Trace};
pub use rational::RationalTf;
pub use realization::{build_lfr, frozen_controller_frf, simulate_closed_loop, step_metrics, LfrController, StepMetrics};
pub use synthesis::{
    bisect_gamma, evaluate_factors, ControllerParameters, SynthesisOptions, SynthesisProblem, SynthesisResult,
    Weight, WeightSet,
};
