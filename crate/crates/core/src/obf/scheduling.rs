use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulingKind {
    /// `psi = [1]`: controller independent of `p`.
    Constant,
    /// `psi = [1, p~]`.
    Affine,
    /// `psi = [1, p~, ..., p~^degree]`.
    Polynomial,
}

/// Monomials of the scheduling value rescaled to `p~ in [-1, 1]` over `range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulingBasis {
    kind: SchedulingKind,
    degree: usize,
    range: (f64, f64),
}

impl SchedulingBasis {
    pub fn new(kind: SchedulingKind, degree: usize, range: (f64, f64)) -> Result<Self> {
        let degree = match kind {
            SchedulingKind::Constant => 0,
            SchedulingKind::Affine => 1,
            SchedulingKind::Polynomial => degree,
        };
        if !(range.0 < range.1) && degree > 0 {
            return Err(Error::invalid(format!("scheduling range {range:?} is degenerate")));
        }
        if !(range.0.is_finite() && range.1.is_finite()) {
            return Err(Error::invalid("scheduling range must be finite"));
        }
        Ok(Self { kind, degree, range })
    }

    pub fn constant(range: (f64, f64)) -> Result<Self> {
        Self::new(SchedulingKind::Constant, 0, range)
    }

    pub fn affine(range: (f64, f64)) -> Result<Self> {
        Self::new(SchedulingKind::Affine, 1, range)
    }

    pub fn polynomial(degree: usize, range: (f64, f64)) -> Result<Self> {
        Self::new(SchedulingKind::Polynomial, degree, range)
    }

    pub fn kind(&self) -> SchedulingKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Number of functions `m`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn normalize(&self, p: f64) -> f64 {
        let (lo, hi) = self.range;
        if hi > lo {
            (2.0 * p - lo - hi) / (hi - lo)
        } else {
            0.0
        }
    }

    /// `[psi_1(p), ..., psi_m(p)]`.
    pub fn eval(&self, p: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.range;
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        if !p.is_finite() || p < lo - slack || p > hi + slack {
            return Err(Error::OutOfRange(format!("scheduling value {p} outside [{lo}, {hi}]")));
        }
        let x = self.normalize(p).clamp(-1.0, 1.0);
        let mut out = Vec::with_capacity(self.len());
        let mut v = 1.0;
        for _ in 0..self.len() {
            out.push(v);
            v *= x;
        }
        Ok(out)
    }
}

/// Free-function form of [`SchedulingBasis::eval`].
pub fn scheduling_eval(basis: &SchedulingBasis, p: f64) -> Result<Vec<f64>> {
    basis.eval(p)
}
