//! Versioned TOML configuration of the pipeline.
//!
//! Every section is optional and falls back to the desk-scale defaults.
//! Unknown keys are rejected so that typos surface as configuration errors.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [paths]
//! output_dir = "out"
//!
//! [plant]
//! source = "surrogate"        # or "dataset" (then paths.dataset is read)
//! points = [30.0, 40.0, 50.0]
//!
//! [estimation]
//! samples = 65536
//! periods = 4
//! frequencies = 512
//!
//! [obf]
//! pole = 0.7
//! order_n = 5
//! order_d = 5
//!
//! [scheduling]
//! kind = "affine"             # constant | affine | polynomial
//! degree = 1
//!
//! [weights.S]
//! domain = "s"                # "s": bilinear transform; "z": discrete
//! num = [0.6667, 4.712]
//! den = [1.0, 0.004712]
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOptions;
use crate::error::{Error, Result};
use crate::frf::{FrequencyGrid, SchedulingGrid, Window};
use crate::obf::SchedulingKind;
use crate::plant::{ExperimentOptions, LpvSurrogateModel, SurrogateConstants};
use crate::rational::RationalTf;
use crate::realization::ScenarioOptions;
use crate::synthesis::{SynthesisOptions, Weight, WeightSet};
use crate::workflow::{self, DesignOptions, EstimationOptions};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    pub paths: PathsConfig,
    pub plant: PlantConfig,
    pub estimation: EstimationConfig,
    pub controller0: Option<TfSpec>,
    pub obf: ObfConfig,
    pub scheduling: SchedulingConfig,
    pub synthesis: SynthesisConfig,
    pub weights: Option<WeightsConfig>,
    pub analysis: AnalysisConfig,
    pub scenario: ScenarioOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            paths: PathsConfig::default(),
            plant: PlantConfig::default(),
            estimation: EstimationConfig::default(),
            controller0: None,
            obf: ObfConfig::default(),
            scheduling: SchedulingConfig::default(),
            synthesis: SynthesisConfig::default(),
            weights: None,
            analysis: AnalysisConfig::default(),
            scenario: ScenarioOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub output_dir: PathBuf,
    /// Dataset file; defaults to `<output_dir>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    /// Synthesized controller; defaults to `<output_dir>/controller.json`.
    pub controller: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { output_dir: PathBuf::from("out"), dataset: None, controller: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantSource {
    Surrogate,
    Dataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub source: PlantSource,
    /// Alternative surrogate constants file.
    pub constants: Option<PathBuf>,
    pub points: Vec<f64>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { source: PlantSource::Surrogate, constants: None, points: vec![30.0, 40.0, 50.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub samples: usize,
    pub periods: usize,
    pub frequencies: usize,
    pub f_min_hz: f64,
    pub disturbance_std: f64,
    pub noise_std: f64,
    pub window: Window,
    pub segments: Option<usize>,
    pub sensitivity_threshold: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            samples: 1 << 16,
            periods: 4,
            frequencies: 512,
            f_min_hz: 0.05,
            disturbance_std: 1.0,
            noise_std: 0.0,
            window: Window::Rectangular,
            segments: None,
            sensitivity_threshold: crate::frf::DEFAULT_SENSITIVITY_THRESHOLD,
        }
    }
}

/// Rational filter coefficients in descending powers of `s` or `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfSpec {
    #[serde(default = "default_domain")]
    pub domain: String,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn default_domain() -> String {
    "z".into()
}

impl TfSpec {
    pub fn to_tf(&self, sample_rate: f64, what: &str) -> Result<RationalTf> {
        let r = match self.domain.as_str() {
            "z" => RationalTf::new(self.num.clone(), self.den.clone(), sample_rate),
            "s" => RationalTf::tustin(&self.num, &self.den, sample_rate),
            other => return Err(Error::Config(format!("{what}: unknown domain {other:?} (use \"s\" or \"z\")"))),
        };
        r.map_err(|e| Error::Config(format!("{what}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(rename = "S")]
    pub s: TfSpec,
    #[serde(rename = "SG")]
    pub sg: TfSpec,
    #[serde(rename = "KS")]
    pub ks: TfSpec,
    #[serde(rename = "T")]
    pub t: TfSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObfConfig {
    pub pole: f64,
    pub order_n: usize,
    pub order_d: usize,
}

impl Default for ObfConfig {
    fn default() -> Self {
        Self { pole: 0.7, order_n: 5, order_d: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulingConfig {
    pub kind: SchedulingKind,
    pub degree: usize,
}

impl Default for SchedulingConfig {
    fn default() -> Self {
        Self { kind: SchedulingKind::Affine, degree: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Design an LTI controller (`psi = [1]`) regardless of `scheduling`.
    pub lti: bool,
    pub integral_action: bool,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub tolerance: f64,
    pub eps: Option<f64>,
    pub eps_inflation: f64,
    pub bezout_tolerance: f64,
    /// Rounds of data-driven basis re-selection after the first design.
    pub basis_rounds: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let s = SynthesisOptions::default();
        Self {
            lti: false,
            integral_action: true,
            gamma_min: s.gamma_bounds.0,
            gamma_max: s.gamma_bounds.1,
            tolerance: s.tolerance,
            eps: None,
            eps_inflation: s.eps_inflation,
            bezout_tolerance: workflow::ESTIMATED_BEZOUT_TOLERANCE,
            basis_rounds: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub multiplier_pole: f64,
    pub multiplier_order: usize,
    pub eps: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let a = AnalysisOptions::default();
        Self { multiplier_pole: a.multiplier_pole, multiplier_order: a.multiplier_order, eps: a.eps }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Record length and grid size of a full-scale laboratory campaign.
    pub fn apply_full_scale(&mut self) {
        self.estimation.samples = 240_000;
        self.estimation.frequencies = 1000;
        if 240_000 % self.estimation.periods != 0 {
            self.estimation.periods = 4;
        }
    }

    /// Checks everything that can be checked without touching the file system.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.plant.points.is_empty() {
            return bad("plant.points must list at least one operating point".into());
        }
        let e = &self.estimation;
        if e.samples == 0 || e.frequencies < 2 || !(e.f_min_hz > 0.0) {
            return bad("estimation.samples, estimation.frequencies and estimation.f_min_hz must be positive".into());
        }
        if e.periods > 0 && e.samples % e.periods != 0 {
            return bad(format!("estimation.samples {} is not a multiple of periods {}", e.samples, e.periods));
        }
        let segs = self.segments();
        if segs == 0 || e.samples % segs != 0 {
            return bad(format!("estimation.samples {} is not a multiple of segments {segs}", e.samples));
        }
        if !(e.disturbance_std > 0.0 && e.noise_std >= 0.0) {
            return bad("estimation noise levels must be non-negative with a positive disturbance".into());
        }
        if !(self.obf.pole.abs() < 1.0) {
            return bad(format!("obf.pole {} must lie in (-1, 1)", self.obf.pole));
        }
        if self.obf.order_d < self.obf.order_n {
            return bad("obf.order_d must not be below obf.order_n".into());
        }
        let s = &self.synthesis;
        if !(s.gamma_min > 0.0 && s.gamma_max > s.gamma_min && s.tolerance > 0.0 && s.eps_inflation >= 1.0) {
            return bad("synthesis bounds must satisfy 0 < gamma_min < gamma_max, tolerance > 0, eps_inflation >= 1".into());
        }
        if !(s.bezout_tolerance > 0.0) {
            return bad("synthesis.bezout_tolerance must be positive".into());
        }
        if let Some(w) = &self.weights {
            for (spec, name) in [(&w.s, "S"), (&w.sg, "SG"), (&w.ks, "KS"), (&w.t, "T")] {
                spec.to_tf(200.0, &format!("weights.{name}"))?;
            }
        }
        if let Some(k) = &self.controller0 {
            k.to_tf(200.0, "controller0")?;
        }
        if !(self.analysis.multiplier_pole.abs() < 1.0) {
            return bad("analysis.multiplier_pole must lie in (-1, 1)".into());
        }
        if !(self.scenario.duration_s > 0.0) {
            return bad("scenario.duration_s must be positive".into());
        }
        Ok(())
    }

    pub fn segments(&self) -> usize {
        self.estimation.segments.unwrap_or(self.estimation.periods.max(1))
    }

    pub fn model(&self) -> Result<LpvSurrogateModel> {
        match &self.plant.constants {
            None => Ok(LpvSurrogateModel::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                LpvSurrogateModel::from_constants(&SurrogateConstants::from_toml(&text)?)
            }
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.paths.dataset.clone().unwrap_or_else(|| self.paths.output_dir.join("dataset.csv"))
    }

    pub fn controller_path(&self) -> PathBuf {
        self.paths.controller.clone().unwrap_or_else(|| self.paths.output_dir.join("controller.json"))
    }

    pub fn controller0(&self, sample_rate: f64) -> Result<RationalTf> {
        match &self.controller0 {
            Some(spec) => spec.to_tf(sample_rate, "controller0"),
            None => workflow::default_controller0(sample_rate),
        }
    }

    pub fn weights(&self, sample_rate: f64) -> Result<WeightSet> {
        match &self.weights {
            None => workflow::default_weights(sample_rate),
            Some(w) => {
                let tf = |s: &TfSpec, n: &str| s.to_tf(sample_rate, &format!("weights.{n}")).map(Weight::Rational);
                WeightSet::new(tf(&w.s, "S")?, tf(&w.sg, "SG")?, tf(&w.ks, "KS")?, tf(&w.t, "T")?)
                    .map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    pub fn scheduling_grid(&self, range: (f64, f64)) -> Result<SchedulingGrid> {
        SchedulingGrid::new(self.plant.points.clone(), range).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn frequency_grid(&self, sample_rate: f64) -> Result<Arc<FrequencyGrid>> {
        Ok(Arc::new(FrequencyGrid::logspace(
            2.0 * std::f64::consts::PI * self.estimation.f_min_hz / sample_rate,
            std::f64::consts::PI,
            self.estimation.frequencies,
            Some(sample_rate),
        )?))
    }

    pub fn estimation_options(&self) -> EstimationOptions {
        let e = &self.estimation;
        EstimationOptions {
            n_samples: e.samples,
            experiment: ExperimentOptions {
                disturbance_std: e.disturbance_std,
                noise_std: e.noise_std,
                periods: e.periods,
                seed: self.seed,
            },
            window: e.window,
            segments: self.segments(),
            sensitivity_threshold: e.sensitivity_threshold,
        }
    }

    pub fn design_options(&self) -> DesignOptions {
        let s = &self.synthesis;
        let (kind, degree) = if s.lti { (SchedulingKind::Constant, 0) } else { (self.scheduling.kind, self.scheduling.degree) };
        DesignOptions {
            basis_pole: self.obf.pole,
            order_n: self.obf.order_n,
            order_d: self.obf.order_d,
            scheduling_kind: kind,
            scheduling_degree: degree,
            synthesis: SynthesisOptions {
                eps: s.eps,
                gamma_bounds: (s.gamma_min, s.gamma_max),
                tolerance: s.tolerance,
                integral_action: s.integral_action,
                rolloff_order: 0,
                eps_inflation: s.eps_inflation,
            },
            bezout_tolerance: s.bezout_tolerance,
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            multiplier_pole: self.analysis.multiplier_pole,
            multiplier_order: self.analysis.multiplier_order,
            eps: self.analysis.eps,
            ..AnalysisOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_weights_are_config_errors() {
        assert!(matches!(PipelineConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        let text = "[weights.S]\nnum=[1]\nden=[0]\n[weights.SG]\nnum=[1]\nden=[1]\n[weights.KS]\nnum=[1]\nden=[1]\n[weights.T]\nnum=[1]\nden=[1]\n";
        assert!(matches!(PipelineConfig::from_toml(text), Err(Error::Config(_))));
    }
}
