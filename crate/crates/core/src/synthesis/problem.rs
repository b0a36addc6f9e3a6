use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::weights::WeightSet;
use crate::error::{Error, Result};
use crate::factorization::CoprimeFrfPair;
use crate::frf::{FrequencyGrid, SchedulingGrid};
use crate::obf::{ObfBasis, SchedulingBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Strictness margin; `None` selects `1e-6` times the median `|D_G|`.
    pub eps: Option<f64>,
    /// Bisection bracket for gamma.
    pub gamma_bounds: (f64, f64),
    /// Relative bisection tolerance: stop when `hi / lo <= 1 + tolerance`.
    pub tolerance: f64,
    /// Enforce `D_K(1, p_tau) = 0` at every operating point.
    pub integral_action: bool,
    /// Expected high-frequency roll-off order. Roll-off is shaped through
    /// the `W_KS` and `W_T` weights; the value is recorded, not enforced.
    pub rolloff_order: usize,
    /// Each cone is solved with margin `eps_inflation * eps`; the returned
    /// parameters are then verified against `eps` itself.
    pub eps_inflation: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eps: None,
            gamma_bounds: (1e-3, 1e3),
            tolerance: 1e-3,
            integral_action: false,
            rolloff_order: 0,
            eps_inflation: 2.0,
        }
    }
}

/// Everything needed to pose the gridded synthesis program.
#[derive(Clone, Debug)]
pub struct SynthesisProblem {
    pub pairs: Vec<CoprimeFrfPair>,
    pub grid: Arc<FrequencyGrid>,
    pub scheduling: SchedulingGrid,
    pub scheduling_basis: SchedulingBasis,
    pub basis_n: ObfBasis,
    pub basis_d: ObfBasis,
    pub weights: WeightSet,
    pub options: SynthesisOptions,
}

impl SynthesisProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pairs: Vec<CoprimeFrfPair>,
        scheduling: SchedulingGrid,
        scheduling_basis: SchedulingBasis,
        basis_n: ObfBasis,
        basis_d: ObfBasis,
        weights: WeightSet,
        options: SynthesisOptions,
    ) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::invalid("synthesis needs data for at least one operating point"))?;
        let grid = first.grid().clone();
        if pairs.len() != scheduling.len() {
            return Err(Error::invalid(format!(
                "{} coprime pairs for {} operating points",
                pairs.len(),
                scheduling.len()
            )));
        }
        if pairs.iter().any(|p| *p.grid() != grid) {
            return Err(Error::GridMismatch("coprime pairs use different grids".into()));
        }
        if basis_d.order() < basis_n.order() {
            return Err(Error::invalid(format!(
                "D_K basis order {} must not be below N_K basis order {}",
                basis_d.order(),
                basis_n.order()
            )));
        }
        for &p in scheduling.points() {
            scheduling_basis.eval(p)?;
        }
        let (lo, hi) = options.gamma_bounds;
        if !(lo > 0.0 && hi > lo) || !(options.tolerance > 0.0) {
            return Err(Error::invalid("gamma bounds must satisfy 0 < lo < hi and tolerance > 0"));
        }
        if let Some(e) = options.eps {
            if !(e >= 0.0) {
                return Err(Error::invalid("eps must be non-negative"));
            }
        }
        if !(options.eps_inflation >= 1.0) {
            return Err(Error::invalid("eps inflation must be at least 1"));
        }
        Ok(Self { pairs, grid, scheduling, scheduling_basis, basis_n, basis_d, weights, options })
    }

    /// Strictness margin in effect.
    pub fn eps(&self) -> f64 {
        if let Some(e) = self.options.eps {
            return e;
        }
        let mut mags: Vec<f64> = self.pairs.iter().flat_map(|p| p.d_g.values().iter().map(|v| v.norm())).collect();
        mags.sort_by(|a, b| a.total_cmp(b));
        1e-6 * mags[mags.len() / 2]
    }

    /// Same problem in LTI mode (`psi = [1]`).
    pub fn lti(&self) -> Result<Self> {
        let mut p = self.clone();
        p.scheduling_basis = SchedulingBasis::constant(self.scheduling_basis.range())?;
        Ok(p)
    }

    pub fn with_bases(&self, basis_n: ObfBasis, basis_d: ObfBasis) -> Result<Self> {
        Self::new(
            self.pairs.clone(),
            self.scheduling.clone(),
            self.scheduling_basis.clone(),
            basis_n,
            basis_d,
            self.weights.clone(),
            self.options.clone(),
        )
    }

    pub fn n_vars(&self) -> usize {
        super::params::layout_len(&self.basis_n, &self.basis_d, &self.scheduling_basis)
    }

    /// Index of `w[i][l]` in the decision vector.
    pub fn index_w(&self, i: usize, l: usize) -> usize {
        i * self.scheduling_basis.len() + l
    }

    /// Index of `v[i][l]` in the decision vector.
    pub fn index_v(&self, i: usize, l: usize) -> usize {
        let m = self.scheduling_basis.len();
        self.basis_n.len() * m + i * m + l
    }
}
