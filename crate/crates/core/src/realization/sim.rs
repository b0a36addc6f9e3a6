use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lfr::LfrController;
use crate::error::{Error, Result};
use crate::frf::TimeRecord;
use crate::plant::{LpvSurrogateModel, Trace};
use crate::rational::{LtiFilter, RationalTf};

/// States beyond this magnitude are reported as divergence.
const DIVERGENCE_LIMIT: f64 = 1e12;

fn check_lengths(records: &[&TimeRecord]) -> Result<usize> {
    let n = records[0].len();
    if records.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("reference, scheduling and disturbance must have equal lengths"));
    }
    Ok(n)
}

/// Scheduled closed loop: `e = r - y`, `u = K_p e`, plant input `u + d`.
///
/// At sample `k` the controller output uses `e_k` and the controller state
/// scheduled with `p_k`; the plant is strictly proper so there is no
/// algebraic loop.
pub fn simulate_closed_loop(
    model: &LpvSurrogateModel,
    ctrl: &LfrController,
    reference: &TimeRecord,
    scheduling: &TimeRecord,
    disturbance: &TimeRecord,
) -> Result<Trace> {
    let n = check_lengths(&[reference, scheduling, disturbance])?;
    let (lo, hi) = model.range();
    if let Some(k) = scheduling.samples().iter().position(|p| !(*p >= lo && *p <= hi)) {
        return Err(Error::OutOfRange(format!(
            "scheduling value {} at sample {k} outside [{lo}, {hi}]",
            scheduling.samples()[k]
        )));
    }
    let mut xp = Vector3::zeros();
    let mut xc = ctrl.initial_state();
    let mut tr = Trace::with_capacity(n, model.sample_rate());
    for k in 0..n {
        let p = scheduling.samples()[k];
        let r = reference.samples()[k];
        let d = disturbance.samples()[k];
        let y = (model.c() * xp)[0];
        let e = r - y;
        let u = ctrl.step(&mut xc, e, p)?;
        xp = model.a(p)? * xp + model.b() * (u + d);
        if !u.is_finite() || xp.amax() > DIVERGENCE_LIMIT || xc.amax() > DIVERGENCE_LIMIT || !xc.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "closed loop diverged at sample {k} (t = {:.3} s); the controller does not stabilize this scenario",
                k as f64 / model.sample_rate()
            )));
        }
        tr.push(r, e, u, d, y, p);
    }
    Ok(tr)
}

/// Frozen loop with a rational controller, as a reference for the scheduled
/// simulation at constant `p`.
pub fn simulate_frozen_lti(
    model: &LpvSurrogateModel,
    controller: &RationalTf,
    p: f64,
    reference: &TimeRecord,
    disturbance: &TimeRecord,
) -> Result<Trace> {
    let n = check_lengths(&[reference, disturbance])?;
    let a = model.a(p)?;
    let mut k = LtiFilter::new(controller);
    let mut xp = Vector3::zeros();
    let mut tr = Trace::with_capacity(n, model.sample_rate());
    for i in 0..n {
        let (r, d) = (reference.samples()[i], disturbance.samples()[i]);
        let y = (model.c() * xp)[0];
        let e = r - y;
        let u = k.step(e);
        xp = a * xp + model.b() * (u + d);
        if !u.is_finite() || xp.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Numerical(format!("frozen closed loop diverged at sample {i}")));
        }
        tr.push(r, e, u, d, y, p);
    }
    Ok(tr)
}

/// Third-order Butterworth low-pass with cutoff `cutoff_hz`, discretized by
/// the bilinear transform with the cutoff prewarped.
pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Result<RationalTf> {
    if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate) {
        return Err(Error::OutOfRange(format!("cutoff {cutoff_hz} Hz must lie in (0, fs/2)")));
    }
    let wc = 2.0 * sample_rate * (PI * cutoff_hz / sample_rate).tan();
    RationalTf::tustin(&[wc.powi(3)], &[1.0, 2.0 * wc, 2.0 * wc * wc, wc.powi(3)], sample_rate)
}

/// `offset + amplitude * sign(sin(2 pi f t + phase))`, with `sign(0) = +1`.
pub fn square_wave(n: usize, sample_rate: f64, freq_hz: f64, amplitude: f64, offset: f64, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (2.0 * PI * freq_hz * k as f64 / sample_rate + phase).sin();
            offset + if s >= 0.0 { amplitude } else { -amplitude }
        })
        .collect()
}

/// Square wave about `offset` passed through the low-pass. The filter acts
/// on the deviation from `offset`, so the signal starts at the offset level.
pub fn filtered_square_wave(
    n: usize,
    sample_rate: f64,
    freq_hz: f64,
    amplitude: f64,
    offset: f64,
    phase: f64,
    cutoff_hz: f64,
) -> Result<Vec<f64>> {
    let f = butterworth_lowpass(cutoff_hz, sample_rate)?;
    let dev = square_wave(n, sample_rate, freq_hz, amplitude, 0.0, phase);
    Ok(f.filter(&dev).into_iter().map(|v| v + offset).collect())
}

/// Parameters of the square-wave tracking scenario with square-wave
/// scheduling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOptions {
    pub duration_s: f64,
    pub reference_amplitude: f64,
    pub reference_freq_hz: f64,
    pub scheduling_center: f64,
    pub scheduling_amplitude: f64,
    pub scheduling_freq_hz: f64,
    pub cutoff_hz: f64,
    /// Draws random phases for both square waves when set.
    pub phase_seed: Option<u64>,
    /// Operating points for runs with frozen scheduling.
    pub frozen_points: Vec<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            reference_amplitude: 15.0,
            reference_freq_hz: 0.1,
            scheduling_center: 40.0,
            scheduling_amplitude: 10.0,
            scheduling_freq_hz: 0.23,
            cutoff_hz: 0.7,
            phase_seed: None,
            frozen_points: vec![30.0, 40.0, 50.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSignals {
    pub reference: TimeRecord,
    pub scheduling: TimeRecord,
    pub disturbance: TimeRecord,
}

impl ScenarioOptions {
    /// Time-varying scenario; the scheduling signal is clipped to `range`.
    pub fn signals(&self, sample_rate: f64, range: (f64, f64)) -> Result<ScenarioSignals> {
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("scenario duration must be positive"));
        }
        let n = (self.duration_s * sample_rate).round() as usize;
        let (ph_r, ph_p) = match self.phase_seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI))
            }
            None => (0.0, 0.0),
        };
        let r = filtered_square_wave(
            n,
            sample_rate,
            self.reference_freq_hz,
            self.reference_amplitude,
            0.0,
            ph_r,
            self.cutoff_hz,
        )?;
        let p: Vec<f64> = filtered_square_wave(
            n,
            sample_rate,
            self.scheduling_freq_hz,
            self.scheduling_amplitude,
            self.scheduling_center,
            ph_p,
            self.cutoff_hz,
        )?
        .into_iter()
        .map(|v| v.clamp(range.0, range.1))
        .collect();
        Ok(ScenarioSignals {
            reference: TimeRecord::new(r, sample_rate, "r")?,
            scheduling: TimeRecord::new(p, sample_rate, "p")?,
            disturbance: TimeRecord::new(vec![0.0; n], sample_rate, "d")?,
        })
    }

    /// Same reference with the scheduling variable frozen at `p`.
    pub fn frozen_signals(&self, sample_rate: f64, p: f64) -> Result<ScenarioSignals> {
        let mut s = self.signals(sample_rate, (p, p))?;
        s.scheduling = TimeRecord::new(vec![p; s.reference.len()], sample_rate, "p")?;
        Ok(s)
    }
}
