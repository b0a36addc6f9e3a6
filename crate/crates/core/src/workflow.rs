//! End-to-end pipeline on the surrogate plant: closed-loop experiments,
//! frequency response estimation, problem set-up and LTI/LPV comparison.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{coprime_from_closed_loop_with_tol, CoprimeFrfPair};
use crate::frf::{
    closed_loop_to_plant_with_threshold, etfe_estimate, FrequencyGrid, FrfDataset, SchedulingGrid, Window,
    DEFAULT_SENSITIVITY_THRESHOLD,
};
use crate::obf::{ObfBasis, SchedulingBasis, SchedulingKind};
use crate::plant::{generate_experiment, Experiment, ExperimentOptions, LpvSurrogateModel};
use crate::rational::RationalTf;
use crate::synthesis::{bisect_gamma, SynthesisOptions, SynthesisProblem, SynthesisResult, Weight, WeightSet};

/// Channel labels of an estimated dataset.
pub const CHANNEL_S: &str = "S";
pub const CHANNEL_SG: &str = "SG";
pub const CHANNEL_G: &str = "G";

/// Bezout tolerance for estimated (noisy or leakage-affected) data. The
/// exact identity holds for model data; estimates satisfy it to the
/// estimation error.
pub const ESTIMATED_BEZOUT_TOLERANCE: f64 = 2e-2;

/// Default stabilizing lead-lag controller `1.2 (z - e^{-2T}) / (z - e^{-3T})`.
pub fn default_controller0(sample_rate: f64) -> Result<RationalTf> {
    let t = 1.0 / sample_rate;
    RationalTf::new(vec![1.2, -1.2 * (-2.0 * t).exp()], vec![1.0, -(-3.0 * t).exp()], sample_rate)
}

/// Logarithmic grid from 0.05 Hz to Nyquist.
pub fn default_grid(n: usize, sample_rate: f64) -> Result<Arc<FrequencyGrid>> {
    Ok(Arc::new(FrequencyGrid::logspace(2.0 * PI * 0.05 / sample_rate, PI, n, Some(sample_rate))?))
}

/// Continuous-time weight shapes, discretized with the bilinear transform.
///
/// * `W_S`: inverse of a sensitivity bound with peak `1.5` and bandwidth
///   0.75 Hz, with near-integral low-frequency gain.
/// * `W_SG`: unit weight.
/// * `W_KS`: bounds control effort with a first-order roll-up above 20 Hz.
/// * `W_T`: complementary sensitivity bound rising above 4 Hz.
pub fn default_weights(sample_rate: f64) -> Result<WeightSet> {
    let ws_b = 2.0 * PI * 0.75;
    let w_s = RationalTf::tustin(&[1.0 / 1.5, ws_b], &[1.0, ws_b * 1e-3], sample_rate)?;
    let (ku, wu) = (500.0, 2.0 * PI * 20.0);
    let w_ks = RationalTf::tustin(&[1.0 / (ku * wu), 1.0 / ku], &[1.0 / (10.0 * wu), 1.0], sample_rate)?;
    let (mt, wt) = (1.0, 2.0 * PI * 4.0);
    let w_t = RationalTf::tustin(&[1.0 / wt, 1.0 / mt], &[1.0 / (100.0 * wt), 1.0], sample_rate)?;
    WeightSet::new(
        Weight::Rational(w_s),
        Weight::Rational(RationalTf::constant(1.0, sample_rate)?),
        Weight::Rational(w_ks),
        Weight::Rational(w_t),
    )
}

/// Closed-loop experiment and estimation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationOptions {
    pub n_samples: usize,
    pub experiment: ExperimentOptions,
    pub window: Window,
    /// ETFE segments; with periodic excitation use the number of periods.
    pub segments: usize,
    pub sensitivity_threshold: f64,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            n_samples: 1 << 16,
            experiment: ExperimentOptions::default(),
            window: Window::Rectangular,
            segments: 4,
            sensitivity_threshold: DEFAULT_SENSITIVITY_THRESHOLD,
        }
    }
}

/// Runs one closed-loop experiment per operating point and estimates `S`
/// (`d -> u_G`), `SG` (`d -> y`) and the plant `G = SG / S`.
pub fn estimate_dataset(
    model: &LpvSurrogateModel,
    controller0: &RationalTf,
    scheduling: &SchedulingGrid,
    grid: &Arc<FrequencyGrid>,
    opts: &EstimationOptions,
) -> Result<FrfDataset> {
    let experiments = run_experiments(model, controller0, scheduling, opts)?;
    dataset_from_experiments(&experiments, scheduling, grid, opts)
}

/// Closed-loop records at every operating point; point `i` uses seed `seed + i`.
pub fn run_experiments(
    model: &LpvSurrogateModel,
    controller0: &RationalTf,
    scheduling: &SchedulingGrid,
    opts: &EstimationOptions,
) -> Result<Vec<Experiment>> {
    scheduling
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut exp_opts = opts.experiment.clone();
            exp_opts.seed = opts.experiment.seed.wrapping_add(i as u64);
            generate_experiment(model, controller0, p, opts.n_samples, &exp_opts)
        })
        .collect()
}

/// ETFE of `S`, `SG` and `G` from one record per operating point.
pub fn dataset_from_experiments(
    experiments: &[Experiment],
    scheduling: &SchedulingGrid,
    grid: &Arc<FrequencyGrid>,
    opts: &EstimationOptions,
) -> Result<FrfDataset> {
    if experiments.len() != scheduling.len() {
        return Err(Error::invalid(format!(
            "{} records for {} operating points",
            experiments.len(),
            scheduling.len()
        )));
    }
    let mut responses = Vec::with_capacity(experiments.len());
    for exp in experiments {
        let s = etfe_estimate(&exp.d, &exp.u_g, grid, opts.window, opts.segments)?;
        let sg = etfe_estimate(&exp.d, &exp.y, grid, opts.window, opts.segments)?;
        let g = closed_loop_to_plant_with_threshold(&s, &sg, opts.sensitivity_threshold)?;
        responses.push(vec![s, sg, g]);
    }
    FrfDataset::new(
        grid.clone(),
        scheduling.clone(),
        vec![CHANNEL_S.into(), CHANNEL_SG.into(), CHANNEL_G.into()],
        responses,
    )
}

/// Exact frozen responses of the surrogate in the layout of [`estimate_dataset`].
pub fn model_dataset(
    model: &LpvSurrogateModel,
    controller0: &RationalTf,
    scheduling: &SchedulingGrid,
    grid: &Arc<FrequencyGrid>,
) -> Result<FrfDataset> {
    let mut responses = Vec::with_capacity(scheduling.len());
    for &p in scheduling.points() {
        let g = model.frozen_tf(p)?;
        let (pair, _) = crate::factorization::frozen_coprime_from_model(&g, controller0, grid)?;
        responses.push(vec![pair.d_g, pair.n_g, model.frozen_frf(p, grid)?]);
    }
    FrfDataset::new(
        grid.clone(),
        scheduling.clone(),
        vec![CHANNEL_S.into(), CHANNEL_SG.into(), CHANNEL_G.into()],
        responses,
    )
}

/// Coprime pairs `(N_G, D_G) = (SG, S)` for every operating point of a
/// dataset holding `S` and `SG` channels.
pub fn coprime_pairs(ds: &FrfDataset, controller0: &RationalTf, bezout_tolerance: f64) -> Result<Vec<CoprimeFrfPair>> {
    (0..ds.scheduling().len())
        .map(|i| {
            let s = ds.get(i, CHANNEL_S)?;
            let sg = ds.get(i, CHANNEL_SG)?;
            coprime_from_closed_loop_with_tol(s, sg, controller0, bezout_tolerance).map(|(pair, _)| pair)
        })
        .collect()
}

/// Controller structure for the synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub basis_pole: f64,
    pub order_n: usize,
    pub order_d: usize,
    pub scheduling_kind: SchedulingKind,
    pub scheduling_degree: usize,
    pub synthesis: SynthesisOptions,
    pub bezout_tolerance: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            basis_pole: 0.7,
            order_n: 5,
            order_d: 5,
            scheduling_kind: SchedulingKind::Affine,
            scheduling_degree: 1,
            synthesis: SynthesisOptions { integral_action: true, ..SynthesisOptions::default() },
            bezout_tolerance: ESTIMATED_BEZOUT_TOLERANCE,
        }
    }
}

/// Synthesis problem for a dataset with `S` and `SG` channels.
pub fn build_problem(
    ds: &FrfDataset,
    controller0: &RationalTf,
    weights: &WeightSet,
    design: &DesignOptions,
) -> Result<SynthesisProblem> {
    let pairs = coprime_pairs(ds, controller0, design.bezout_tolerance)?;
    let range = ds.scheduling().range();
    let sched = SchedulingBasis::new(design.scheduling_kind, design.scheduling_degree, range)?;
    let basis_n = ObfBasis::laguerre(design.basis_pole, design.order_n)?;
    let basis_d = ObfBasis::laguerre(design.basis_pole, design.order_d)?;
    if design.synthesis.integral_action && ds.grid().omegas()[0] <= 0.0 {
        return Err(Error::invalid("integral action needs a grid without omega = 0"));
    }
    SynthesisProblem::new(
        pairs,
        ds.scheduling().clone(),
        sched,
        basis_n,
        basis_d,
        weights.clone(),
        design.synthesis.clone(),
    )
}

/// LTI (`psi = [1]`) and LPV designs on identical data, bases and weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lti: SynthesisResult,
    pub lpv: SynthesisResult,
}

impl Comparison {
    /// Relative gamma reduction of the LPV design.
    pub fn improvement(&self) -> f64 {
        1.0 - self.lpv.gamma / self.lti.gamma
    }
}

pub fn compare_lti_lpv(problem: &SynthesisProblem) -> Result<Comparison> {
    let lti = bisect_gamma(&problem.lti()?)?;
    let lpv = bisect_gamma(problem)?;
    Ok(Comparison { lti, lpv })
}
