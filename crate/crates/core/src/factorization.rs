//! Stable coprime-factor data of the plant and the closed-loop quantities
//! that are affine in the controller factors.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::{FrequencyGrid, FrfResponse};
use crate::poly;
use crate::rational::RationalTf;

/// `N_G`, `D_G` on a frequency grid, with `G = N_G / D_G`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoprimeFrfPair {
    pub n_g: FrfResponse,
    pub d_g: FrfResponse,
}

impl CoprimeFrfPair {
    pub fn new(n_g: FrfResponse, d_g: FrfResponse) -> Result<Self> {
        if !n_g.same_grid(&d_g) {
            return Err(Error::GridMismatch("N_G and D_G use different grids".into()));
        }
        Ok(Self { n_g, d_g })
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        self.n_g.grid()
    }

    /// Pointwise `N_G / D_G` where `|D_G| > tol`; `None` elsewhere.
    pub fn plant(&self, tol: f64) -> Vec<Option<Complex64>> {
        self.n_g
            .values()
            .iter()
            .zip(self.d_g.values())
            .map(|(n, d)| (d.norm() > tol).then(|| n / d))
            .collect()
    }
}

/// Stable `X`, `Y` with `N_G X + D_G Y = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BezoutWitness {
    pub x: RationalTf,
    pub y: RationalTf,
}

impl BezoutWitness {
    /// `max_k |N_G X + D_G Y - 1|` over the grid.
    pub fn residual(&self, pair: &CoprimeFrfPair) -> f64 {
        let om = pair.grid().omegas();
        let xs = self.x.freq_response(om);
        let ys = self.y.freq_response(om);
        pair.n_g
            .values()
            .iter()
            .zip(pair.d_g.values())
            .zip(xs.iter().zip(ys.iter()))
            .map(|((n, d), (x, y))| (n * x + d * y - 1.0).norm())
            .fold(0.0, f64::max)
    }
}

/// Closed-loop channel whose weighted magnitude is bounded in synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    /// Sensitivity `D_G D_K / D_p`.
    S,
    /// Process sensitivity `N_G D_K / D_p`.
    SG,
    /// Control sensitivity `D_G N_K / D_p`.
    KS,
    /// Complementary sensitivity `N_G N_K / D_p`.
    T,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::S, Channel::SG, Channel::KS, Channel::T];

    pub fn label(self) -> &'static str {
        match self {
            Channel::S => "S",
            Channel::SG => "SG",
            Channel::KS => "KS",
            Channel::T => "T",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label().eq_ignore_ascii_case(s))
    }
}

/// Characteristic data `D_p = D_G D_K + N_G N_K` and channel numerators.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopFactorData {
    pub d_p: Vec<Complex64>,
    /// Indexed by [`Channel::index`].
    pub n_p: [Vec<Complex64>; 4],
}

impl ClosedLoopFactorData {
    pub fn numerator(&self, c: Channel) -> &[Complex64] {
        &self.n_p[c.index()]
    }

    pub fn len(&self) -> usize {
        self.d_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_p.is_empty()
    }

    /// Multiplies every quantity pointwise by `alpha` (used for absorbing a
    /// multiplier into the controller factors).
    pub fn scaled(&self, alpha: &[Complex64]) -> Result<Self> {
        if alpha.len() != self.len() {
            return Err(Error::GridMismatch("multiplier length differs from data".into()));
        }
        let mul = |v: &[Complex64]| v.iter().zip(alpha).map(|(a, b)| a * b).collect::<Vec<_>>();
        Ok(Self {
            d_p: mul(&self.d_p),
            n_p: [mul(&self.n_p[0]), mul(&self.n_p[1]), mul(&self.n_p[2]), mul(&self.n_p[3])],
        })
    }
}

/// Default tolerance on the Bezout residual for data-based factors.
pub const BEZOUT_TOLERANCE: f64 = 1e-6;

/// Factors from closed-loop estimates: `N_G = S G`, `D_G = S`, witness `(K0, 1)`.
pub fn coprime_from_closed_loop(
    sens: &FrfResponse,
    proc_sens: &FrfResponse,
    controller0: &RationalTf,
) -> Result<(CoprimeFrfPair, BezoutWitness)> {
    coprime_from_closed_loop_with_tol(sens, proc_sens, controller0, BEZOUT_TOLERANCE)
}

pub fn coprime_from_closed_loop_with_tol(
    sens: &FrfResponse,
    proc_sens: &FrfResponse,
    controller0: &RationalTf,
    tolerance: f64,
) -> Result<(CoprimeFrfPair, BezoutWitness)> {
    if !controller0.is_stable() {
        return Err(Error::UnstableController(
            "the initial controller must have all poles inside the unit circle".into(),
        ));
    }
    let pair = CoprimeFrfPair::new(proc_sens.clone(), sens.clone())?;
    let witness = BezoutWitness {
        x: controller0.clone(),
        y: RationalTf::constant(1.0, controller0.sample_rate())?,
    };
    let residual = witness.residual(&pair);
    if !(residual <= tolerance) {
        return Err(Error::BezoutResidual { residual, tolerance });
    }
    Ok((pair, witness))
}

/// Rational coprime factors `N_G = G S0`, `D_G = S0` with `S0 = 1 / (1 + G K0)`.
/// Both share the unreduced closed-loop characteristic polynomial as denominator.
pub fn coprime_factors_rational(g: &RationalTf, controller0: &RationalTf) -> Result<(RationalTf, RationalTf)> {
    let (ng, dg) = (g.num(), g.den());
    let (nk, dk) = (controller0.num(), controller0.den());
    let char_poly = poly::add(&poly::mul(dg, dk), &poly::mul(ng, nk));
    let fs = g.sample_rate();
    let n_fac = RationalTf::new(poly::mul(ng, dk), char_poly.clone(), fs)?;
    let d_fac = RationalTf::new(poly::mul(dg, dk), char_poly, fs)?;
    Ok((n_fac, d_fac))
}

/// Analytic counterpart of [`coprime_from_closed_loop`] for a known plant.
pub fn frozen_coprime_from_model(
    g: &RationalTf,
    controller0: &RationalTf,
    grid: &Arc<FrequencyGrid>,
) -> Result<(CoprimeFrfPair, BezoutWitness)> {
    if !controller0.is_stable() {
        return Err(Error::UnstableController(
            "the initial controller must have all poles inside the unit circle".into(),
        ));
    }
    // Pointwise from the unexpanded polynomials: the expanded characteristic
    // polynomial of a plant with clustered poles loses digits near z = 1.
    let (mut n_vals, mut d_vals) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for z in grid.unit_circle() {
        let (ng, dg) = (poly::eval(g.num(), z), poly::eval(g.den(), z));
        let (nk, dk) = (poly::eval(controller0.num(), z), poly::eval(controller0.den(), z));
        let char_val = dg * dk + ng * nk;
        n_vals.push(ng * dk / char_val);
        d_vals.push(dg * dk / char_val);
    }
    let pair = CoprimeFrfPair::new(FrfResponse::new(n_vals, grid.clone())?, FrfResponse::new(d_vals, grid.clone())?)?;
    let witness = BezoutWitness {
        x: controller0.clone(),
        y: RationalTf::constant(1.0, controller0.sample_rate())?,
    };
    Ok((pair, witness))
}

/// Pointwise `D_p = D_G D_K + N_G N_K` and the four channel numerators
/// `D_G D_K`, `N_G D_K`, `D_G N_K`, `N_G N_K`.
pub fn assemble_closed_loop(pair: &CoprimeFrfPair, nk: &[Complex64], dk: &[Complex64]) -> Result<ClosedLoopFactorData> {
    let n = pair.n_g.len();
    if nk.len() != n || dk.len() != n {
        return Err(Error::GridMismatch(format!(
            "controller factors have lengths {} and {}, grid has {n}",
            nk.len(),
            dk.len()
        )));
    }
    let ng = pair.n_g.values();
    let dg = pair.d_g.values();
    let s: Vec<_> = (0..n).map(|k| dg[k] * dk[k]).collect();
    let sg: Vec<_> = (0..n).map(|k| ng[k] * dk[k]).collect();
    let ks: Vec<_> = (0..n).map(|k| dg[k] * nk[k]).collect();
    let t: Vec<_> = (0..n).map(|k| ng[k] * nk[k]).collect();
    let d_p = (0..n).map(|k| s[k] + t[k]).collect();
    Ok(ClosedLoopFactorData { d_p, n_p: [s, sg, ks, t] })
}
