//! Discrete-time rational transfer functions in the shift variable `z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// `num(z) / den(z)` with coefficients in descending powers of `z`.
///
/// Construction trims exact leading zeros, rejects a zero denominator and
/// requires properness (`deg num <= deg den`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf")]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
    sample_rate: f64,
}

#[derive(Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
    sample_rate: f64,
}

impl TryFrom<RawTf> for RationalTf {
    type Error = Error;
    fn try_from(r: RawTf) -> Result<Self> {
        RationalTf::new(r.num, r.den, r.sample_rate)
    }
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("transfer function coefficients must be finite"));
        }
        let num = poly::trim(&num);
        let den = poly::trim(&den);
        if poly::is_zero(&den) {
            return Err(Error::invalid("denominator is identically zero"));
        }
        if !poly::is_zero(&num) && num.len() > den.len() {
            return Err(Error::invalid(format!(
                "improper transfer function: numerator degree {} exceeds denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(Self { num, den, sample_rate })
    }

    pub fn constant(gain: f64, sample_rate: f64) -> Result<Self> {
        Self::new(vec![gain], vec![1.0], sample_rate)
    }

    /// Pure delay `z^{-k}`.
    pub fn delay(k: usize, sample_rate: f64) -> Result<Self> {
        let mut den = vec![0.0; k + 1];
        den[0] = 1.0;
        Self::new(vec![1.0], den, sample_rate)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        poly::eval(&self.num, z) / poly::eval(&self.den, z)
    }

    /// Frequency response at `e^{i omega}` for each normalized frequency.
    pub fn freq_response(&self, omegas: &[f64]) -> Vec<Complex64> {
        omegas
            .iter()
            .map(|&w| self.eval(Complex64::from_polar(1.0, w)))
            .collect()
    }

    pub fn dc_gain(&self) -> f64 {
        poly::eval_real(&self.num, 1.0) / poly::eval_real(&self.den, 1.0)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        poly::roots(&self.num)
    }

    /// All poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    pub fn is_strictly_proper(&self) -> bool {
        poly::is_zero(&self.num) || self.num.len() < self.den.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            num: poly::trim(&poly::scale(&self.num, s)),
            den: self.den.clone(),
            sample_rate: self.sample_rate,
        }
    }

    /// Series connection `self * other`.
    pub fn series(&self, other: &RationalTf) -> Result<Self> {
        Self::new(
            poly::mul(&self.num, &other.num),
            poly::mul(&self.den, &other.den),
            self.sample_rate,
        )
    }

    /// Parallel connection `self + other`.
    pub fn parallel(&self, other: &RationalTf) -> Result<Self> {
        Self::new(
            poly::add(&poly::mul(&self.num, &other.den), &poly::mul(&other.num, &self.den)),
            poly::mul(&self.den, &other.den),
            self.sample_rate,
        )
    }

    /// Filters `x` from rest (zero initial conditions).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut f = LtiFilter::new(self);
        x.iter().map(|&v| f.step(v)).collect()
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        if n > 0 {
            x[0] = 1.0;
        }
        self.filter(&x)
    }

    /// Bilinear (Tustin) discretization of a continuous-time rational
    /// `num_s(s) / den_s(s)` (descending powers of `s`), using
    /// `s = 2 fs (z - 1) / (z + 1)`.
    pub fn tustin(num_s: &[f64], den_s: &[f64], sample_rate: f64) -> Result<Self> {
        let num_s = poly::trim(num_s);
        let den_s = poly::trim(den_s);
        if poly::is_zero(&den_s) {
            return Err(Error::invalid("continuous denominator is identically zero"));
        }
        let n = (num_s.len().max(den_s.len())) - 1;
        let c = 2.0 * sample_rate;
        let map = |p: &[f64]| -> Vec<f64> {
            let deg = p.len() - 1;
            let mut acc = vec![0.0; n + 1];
            for (i, &coef) in p.iter().enumerate() {
                let k = deg - i;
                let mut term = vec![coef * c.powi(k as i32)];
                for _ in 0..k {
                    term = poly::mul(&term, &[1.0, -1.0]);
                }
                for _ in 0..(n - k) {
                    term = poly::mul(&term, &[1.0, 1.0]);
                }
                acc = poly::add(&acc, &term);
            }
            acc
        };
        Self::new(map(&num_s), map(&den_s), sample_rate)
    }
}

/// Streaming transposed direct-form II realization of a [`RationalTf`].
#[derive(Clone, Debug)]
pub struct LtiFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
}

impl LtiFilter {
    pub fn new(tf: &RationalTf) -> Self {
        let n = tf.den.len();
        let a0 = tf.den[0];
        let a: Vec<f64> = tf.den.iter().map(|c| c / a0).collect();
        let b: Vec<f64> = poly::pad_to(&tf.num, n).iter().map(|c| c / a0).collect();
        Self {
            b,
            a,
            state: vec![0.0; n.saturating_sub(1)],
        }
    }

    /// Output for input sample `x`; advances the internal state.
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.state.first().copied().unwrap_or(0.0);
        let n = self.state.len();
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
        }
        y
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }
}
