//! Surrogate LPV plant: frozen models, frozen FRFs, time-domain simulation
//! and closed-loop identification experiments.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, RowVector3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::oracle_stability;
use crate::error::{Error, Result};
use crate::frf::{FrequencyGrid, FrfResponse, TimeRecord};
use crate::linalg::StateSpace;
use crate::poly;
use crate::rational::{LtiFilter, RationalTf};

const SURROGATE_TOML: &str = include_str!("../data/surrogate.toml");

/// Physical-style constants of the default surrogate (see `data/surrogate.toml`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConstants {
    pub version: u32,
    pub sample_rate: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub a11: f64,
    pub k: f64,
    pub kp: f64,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
}

impl SurrogateConstants {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(format!("surrogate constants: {e}")))?;
        if c.version != 1 {
            return Err(Error::Config(format!("unsupported surrogate constants version {}", c.version)));
        }
        Ok(c)
    }

    pub fn embedded() -> Self {
        Self::from_toml(SURROGATE_TOML).expect("embedded surrogate constants are valid")
    }
}

/// Three-state LPV model `x+ = (A0 + p A1) x + B u`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpvSurrogateModel {
    a0: Matrix3<f64>,
    a1: Matrix3<f64>,
    b: Vector3<f64>,
    c: RowVector3<f64>,
    sample_rate: f64,
    range: (f64, f64),
}

impl Default for LpvSurrogateModel {
    fn default() -> Self {
        Self::from_constants(&SurrogateConstants::embedded()).expect("embedded surrogate is valid")
    }
}

impl LpvSurrogateModel {
    pub fn new(
        a0: Matrix3<f64>,
        a1: Matrix3<f64>,
        b: Vector3<f64>,
        c: RowVector3<f64>,
        sample_rate: f64,
        range: (f64, f64),
    ) -> Result<Self> {
        if !(sample_rate > 0.0) || !(range.0 <= range.1) {
            return Err(Error::invalid("invalid sample rate or scheduling range"));
        }
        Ok(Self { a0, a1, b, c, sample_rate, range })
    }

    pub fn from_constants(k: &SurrogateConstants) -> Result<Self> {
        let t = 1.0 / k.sample_rate;
        let a0 = Matrix3::new(
            k.a11, 0.0, t, //
            0.0, 1.0 - t * k.c0, 0.0, //
            0.0, 0.0, 1.0 - t * k.c0,
        );
        let a1 = Matrix3::new(
            0.0, 0.0, 0.0, //
            0.0, -t * k.c1, -t * k.k, //
            0.0, t * k.kp, -t * k.c1,
        );
        Self::new(
            a0,
            a1,
            Vector3::new(0.0, t * k.b, 0.0),
            RowVector3::new(1.0, 0.0, 0.0),
            k.sample_rate,
            (k.p_min, k.p_max),
        )
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn check(&self, p: f64) -> Result<()> {
        let span = (self.range.1 - self.range.0).abs().max(1.0);
        if !p.is_finite() || p < self.range.0 - 1e-9 * span || p > self.range.1 + 1e-9 * span {
            return Err(Error::OutOfRange(format!(
                "scheduling value {p} outside [{}, {}]",
                self.range.0, self.range.1
            )));
        }
        Ok(())
    }

    pub fn a(&self, p: f64) -> Result<Matrix3<f64>> {
        self.check(p)?;
        Ok(self.a0 + self.a1 * p)
    }

    pub fn b(&self) -> Vector3<f64> {
        self.b
    }

    pub fn c(&self) -> RowVector3<f64> {
        self.c
    }

    pub fn state_space(&self, p: f64) -> Result<StateSpace> {
        let a = self.a(p)?;
        StateSpace::new(
            DMatrix::from_iterator(3, 3, a.iter().copied()),
            DMatrix::from_iterator(3, 1, self.b.iter().copied()),
            DMatrix::from_iterator(1, 3, self.c.iter().copied()),
            DMatrix::zeros(1, 1),
        )
    }

    /// Frozen transfer function `C (zI - A(p))^{-1} B`.
    ///
    /// The numerator comes from the Faddeev-LeVerrier expansion
    /// `adj(zI - A) = sum_k z^{n-1-k} M_k`, which keeps the structural zeros
    /// of `C M_k B` exact instead of recovering them by cancellation.
    pub fn frozen_tf(&self, p: f64) -> Result<RationalTf> {
        let a = self.a(p)?;
        let den = poly::charpoly(&DMatrix::from_iterator(3, 3, a.iter().copied()));
        let mut m = Matrix3::identity();
        let mut num = Vec::with_capacity(3);
        for &c in &den[1..] {
            num.push((self.c * m * self.b)[0]);
            m = a * m + Matrix3::identity() * c;
        }
        let scale = den.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        RationalTf::new(poly::trim_tol(&num, scale, 1e-14), den, self.sample_rate)
    }

    /// Frozen response by resolvent evaluation of the state-space model.
    pub fn frozen_frf(&self, p: f64, grid: &Arc<FrequencyGrid>) -> Result<FrfResponse> {
        let values = self.state_space(p)?.freq_response(0, 0, grid.omegas())?;
        FrfResponse::new(values, grid.clone())
    }

    /// State recursion from the zero state with time-varying scheduling.
    pub fn simulate_lpv(&self, input: &TimeRecord, scheduling: &TimeRecord) -> Result<TimeRecord> {
        if input.len() != scheduling.len() {
            return Err(Error::invalid(format!(
                "input has {} samples but scheduling has {}",
                input.len(),
                scheduling.len()
            )));
        }
        let mut x = Vector3::zeros();
        let mut y = Vec::with_capacity(input.len());
        for (k, (&u, &p)) in input.samples().iter().zip(scheduling.samples()).enumerate() {
            let a = self.a(p).map_err(|e| Error::OutOfRange(format!("sample {k}: {e}")))?;
            y.push((self.c * x)[0]);
            x = a * x + self.b * u;
        }
        TimeRecord::new(y, input.sample_rate(), "y")
    }
}

/// Excitation and noise settings for [`generate_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Standard deviation of the white disturbance injected at the plant input.
    pub disturbance_std: f64,
    /// Standard deviation of white measurement noise added to `y`.
    pub noise_std: f64,
    /// Number of identical disturbance periods in the record; `0` draws an
    /// aperiodic sequence. In periodic mode one extra period is simulated
    /// first and discarded so the recorded data are in periodic steady state.
    pub periods: usize,
    pub seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { disturbance_std: 1.0, noise_std: 0.0, periods: 4, seed: 0 }
    }
}

/// Records from one closed-loop experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub d: TimeRecord,
    pub u_g: TimeRecord,
    pub y: TimeRecord,
}

/// Closed-loop experiment at frozen `p` with `r = 0`: `e = -(y + noise)`,
/// `u = K0 e`, plant input `u_G = u + d`.
pub fn generate_experiment(
    model: &LpvSurrogateModel,
    controller0: &RationalTf,
    p: f64,
    n_samples: usize,
    opts: &ExperimentOptions,
) -> Result<Experiment> {
    let g = model.frozen_tf(p)?;
    if !oracle_stability(&g, controller0)? {
        return Err(Error::Destabilizing(format!("initial controller does not stabilize the plant at p = {p}")));
    }
    if !(opts.disturbance_std >= 0.0 && opts.noise_std >= 0.0) {
        return Err(Error::invalid("standard deviations must be non-negative"));
    }
    if opts.periods > 0 && n_samples % opts.periods != 0 {
        return Err(Error::invalid(format!(
            "record length {n_samples} is not a multiple of {} periods",
            opts.periods
        )));
    }
    let mut rng_d = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rng_n = ChaCha8Rng::seed_from_u64(opts.seed);
    rng_n.set_stream(1);
    let nd = Normal::new(0.0, opts.disturbance_std).map_err(|e| Error::invalid(e.to_string()))?;
    let nn = Normal::new(0.0, opts.noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let (pre, d_full): (usize, Vec<f64>) = if opts.periods > 0 {
        let len = n_samples / opts.periods;
        let base: Vec<f64> = (0..len).map(|_| nd.sample(&mut rng_d)).collect();
        let full = base.iter().copied().cycle().take(n_samples + len).collect();
        (len, full)
    } else {
        (0, (0..n_samples).map(|_| nd.sample(&mut rng_d)).collect())
    };

    let a = model.a(p)?;
    let mut k0 = LtiFilter::new(controller0);
    let mut x = Vector3::zeros();
    let mut d_rec = Vec::with_capacity(n_samples);
    let mut ug_rec = Vec::with_capacity(n_samples);
    let mut y_rec = Vec::with_capacity(n_samples);
    for (k, &d) in d_full.iter().enumerate() {
        let y = (model.c * x)[0] + nn.sample(&mut rng_n);
        let u = k0.step(-y);
        let ug = u + d;
        if k >= pre {
            d_rec.push(d);
            ug_rec.push(ug);
            y_rec.push(y);
        }
        x = a * x + model.b * ug;
    }
    let fs = model.sample_rate;
    Ok(Experiment {
        d: TimeRecord::new(d_rec, fs, "d")?,
        u_g: TimeRecord::new(ug_rec, fs, "u_G")?,
        y: TimeRecord::new(y_rec, fs, "y")?,
    })
}

/// Time-indexed closed-loop signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub sample_rate: f64,
}

impl Trace {
    pub fn with_capacity(n: usize, sample_rate: f64) -> Self {
        let v = || Vec::with_capacity(n);
        Self { r: v(), e: v(), u: v(), d: v(), y: v(), p: v(), sample_rate }
    }

    pub fn push(&mut self, r: f64, e: f64, u: f64, d: f64, y: f64, p: f64) {
        self.r.push(r);
        self.e.push(e);
        self.u.push(u);
        self.d.push(d);
        self.y.push(y);
        self.p.push(p);
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Writes `t,r,e,u,d,y,p` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        let werr = |e: csv::Error| Error::Parse { location: path.display().to_string(), message: e.to_string() };
        w.write_record(["t", "r", "e", "u", "d", "y", "p"]).map_err(werr)?;
        for k in 0..self.len() {
            let t = k as f64 / self.sample_rate;
            w.write_record(
                [t, self.r[k], self.e[k], self.u[k], self.d[k], self.y[k], self.p[k]]
                    .iter()
                    .map(|v| v.to_string()),
            )
            .map_err(werr)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
