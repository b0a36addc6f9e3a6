use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::Channel;
use crate::frf::{FrequencyGrid, FrfResponse};
use crate::rational::RationalTf;

/// A channel weight: a stable rational filter or a response tabulated on the
/// synthesis grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Rational(RationalTf),
    Tabulated(FrfResponse),
}

impl Weight {
    pub fn eval(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        let v = match self {
            Weight::Rational(tf) => tf.freq_response(grid.omegas()),
            Weight::Tabulated(r) => {
                if r.grid().as_ref() != grid {
                    return Err(Error::GridMismatch("tabulated weight uses a different grid".into()));
                }
                r.values().to_vec()
            }
        };
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("weight not finite at grid index {k}")));
        }
        Ok(v)
    }

    fn scaled(&self, s: f64) -> Result<Self> {
        Ok(match self {
            Weight::Rational(tf) => Weight::Rational(tf.scaled(s)),
            Weight::Tabulated(r) => Weight::Tabulated(r.map(|v| v * s)?),
        })
    }
}

/// Weights `W_S`, `W_SG`, `W_KS`, `W_T` in [`Channel`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    weights: [Weight; 4],
}

impl WeightSet {
    pub fn new(s: Weight, sg: Weight, ks: Weight, t: Weight) -> Result<Self> {
        let weights = [s, sg, ks, t];
        for (w, c) in weights.iter().zip(Channel::ALL) {
            if let Weight::Rational(tf) = w {
                if !tf.is_stable() {
                    return Err(Error::invalid(format!("weight {} has poles on or outside the unit circle", c.label())));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn get(&self, c: Channel) -> &Weight {
        &self.weights[c.index()]
    }

    /// Weight responses on the grid in [`Channel`] order.
    pub fn eval(&self, grid: &FrequencyGrid) -> Result<[Vec<Complex64>; 4]> {
        Ok([
            self.weights[0].eval(grid)?,
            self.weights[1].eval(grid)?,
            self.weights[2].eval(grid)?,
            self.weights[3].eval(grid)?,
        ])
    }

    /// All weights multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Ok(Self {
            weights: [
                self.weights[0].scaled(s)?,
                self.weights[1].scaled(s)?,
                self.weights[2].scaled(s)?,
                self.weights[3].scaled(s)?,
            ],
        })
    }
}
