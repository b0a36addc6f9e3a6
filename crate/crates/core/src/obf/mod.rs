//! Orthonormal basis functions in `z`, scheduling basis functions, filter-bank
//! realizations, pole clustering and iterative basis selection.

mod bank;
mod cluster;
mod scheduling;
mod selection;

pub use bank::{realize_bank, BasisBankRealization};
pub use cluster::{cluster_poles, cluster_poles_with, ClusterOptions};
pub use scheduling::{scheduling_eval, SchedulingBasis, SchedulingKind};
pub use selection::{
    basis_from_centers, basis_selection_iterate, basis_selection_iterate_with, controller_roots, SelectionOptions,
    SelectionOutcome,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FrequencyGrid;
use crate::poly;

/// One section of a cascaded inner-function basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisBlock {
    /// Real pole: one basis function.
    Real { pole: f64 },
    /// Complex-conjugate pole pair `re +- i im` (two Kautz functions).
    Pair { re: f64, im: f64 },
}

impl BasisBlock {
    pub fn functions(&self) -> usize {
        match self {
            BasisBlock::Real { .. } => 1,
            BasisBlock::Pair { .. } => 2,
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        match *self {
            BasisBlock::Real { pole } => vec![Complex64::new(pole, 0.0)],
            BasisBlock::Pair { re, im } => vec![Complex64::new(re, im), Complex64::new(re, -im)],
        }
    }

    fn modulus(&self) -> f64 {
        match *self {
            BasisBlock::Real { pole } => pole.abs(),
            BasisBlock::Pair { re, im } => re.hypot(im),
        }
    }

    /// Kautz parameters `(b, c)` of a pair with denominator `z^2 + b(c-1) z - c`.
    fn kautz(re: f64, im: f64) -> (f64, f64) {
        let m2 = re * re + im * im;
        (2.0 * re / (1.0 + m2), -m2)
    }

    /// Denominator polynomial of the section (descending powers).
    pub(crate) fn denominator(&self) -> Vec<f64> {
        match *self {
            BasisBlock::Real { pole } => vec![1.0, -pole],
            BasisBlock::Pair { re, im } => {
                let (b, c) = Self::kautz(re, im);
                vec![1.0, b * (c - 1.0), -c]
            }
        }
    }

    /// Numerator of the all-pass factor passed on to later sections.
    pub(crate) fn allpass_numerator(&self) -> Vec<f64> {
        match *self {
            BasisBlock::Real { pole } => vec![-pole, 1.0],
            BasisBlock::Pair { re, im } => {
                let (b, c) = Self::kautz(re, im);
                vec![-c, b * (c - 1.0), 1.0]
            }
        }
    }

    /// Numerators of the section's basis functions, before the prefix all-pass.
    pub(crate) fn function_numerators(&self) -> Vec<Vec<f64>> {
        match *self {
            BasisBlock::Real { pole } => vec![vec![(1.0 - pole * pole).sqrt()]],
            BasisBlock::Pair { re, im } => {
                let (b, c) = Self::kautz(re, im);
                let g = (1.0 - c * c).sqrt();
                vec![vec![g, -g * b], vec![g * (1.0 - b * b).sqrt()]]
            }
        }
    }
}

/// `{phi_0 = 1, phi_1, ..., phi_n}` built from cascaded sections.
///
/// Functions of a section are multiplied by the product of the all-pass
/// factors of all preceding sections (Takenaka-Malmquist construction), so
/// the family is orthonormal in H2 for any admissible pole sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObfBasis {
    blocks: Vec<BasisBlock>,
    order: usize,
}

impl ObfBasis {
    /// Basis from sections, truncated to `order` non-constant functions. The
    /// sections must provide at least `order` functions.
    pub fn from_blocks(blocks: Vec<BasisBlock>, order: usize) -> Result<Self> {
        for b in &blocks {
            let ok = match *b {
                BasisBlock::Real { pole } => pole.is_finite(),
                BasisBlock::Pair { re, im } => re.is_finite() && im.is_finite() && im != 0.0,
            };
            if !ok {
                return Err(Error::invalid(format!("invalid basis section {b:?}")));
            }
            if b.modulus() >= 1.0 - 1e-9 {
                return Err(Error::OutOfRange(format!("basis pole modulus {} not below 1", b.modulus())));
            }
        }
        let available: usize = blocks.iter().map(|b| b.functions()).sum();
        if available < order {
            return Err(Error::invalid(format!("sections provide {available} functions, {order} requested")));
        }
        // Drop trailing sections that contribute nothing.
        let mut used = Vec::new();
        let mut count = 0;
        for b in blocks {
            if count >= order {
                break;
            }
            count += b.functions();
            used.push(b);
        }
        Ok(Self { blocks: used, order })
    }

    /// Laguerre basis with real pole `a` and `n` non-constant functions.
    pub fn laguerre(a: f64, n: usize) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::OutOfRange(format!("Laguerre pole {a} must satisfy |a| < 1")));
        }
        Self::from_blocks(vec![BasisBlock::Real { pole: a }; n], n)
    }

    /// Non-constant function count `n`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Total function count including `phi_0`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blocks(&self) -> &[BasisBlock] {
        &self.blocks
    }

    /// Generating poles, one entry per non-constant function slot of each
    /// section (conjugate pairs listed together).
    pub fn poles(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|b| b.poles()).collect()
    }

    /// `[phi_0(z), ..., phi_n(z)]`.
    pub fn eval_at(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        out.push(Complex64::new(1.0, 0.0));
        let mut prefix = Complex64::new(1.0, 0.0);
        'outer: for b in &self.blocks {
            let den = poly::eval(&b.denominator(), z);
            for num in b.function_numerators() {
                if out.len() == self.len() {
                    break 'outer;
                }
                out.push(prefix * poly::eval(&num, z) / den);
            }
            prefix *= poly::eval(&b.allpass_numerator(), z) / den;
        }
        out
    }

    /// Rational form: each function's numerator over the common denominator
    /// (product of all section denominators), plus that denominator.
    pub fn rational_numerators(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let dens: Vec<Vec<f64>> = self.blocks.iter().map(|b| b.denominator()).collect();
        let common = dens.iter().fold(vec![1.0], |acc, d| poly::mul(&acc, d));
        let mut nums = vec![common.clone()];
        let mut prefix = vec![1.0];
        for (j, b) in self.blocks.iter().enumerate() {
            let tail = dens[j + 1..].iter().fold(vec![1.0], |acc, d| poly::mul(&acc, d));
            for num in b.function_numerators() {
                if nums.len() == self.len() {
                    break;
                }
                nums.push(poly::pad_to(&poly::mul(&poly::mul(&prefix, &num), &tail), common.len()));
            }
            prefix = poly::mul(&prefix, &b.allpass_numerator());
        }
        (nums, common)
    }
}

/// Evaluates all functions on the grid: row `i`, column `k` holds `phi_i(e^{i omega_k})`.
pub fn eval_basis(basis: &ObfBasis, grid: &FrequencyGrid) -> DMatrix<Complex64> {
    let n = grid.len();
    let mut m = DMatrix::<Complex64>::zeros(basis.len(), n);
    for (k, z) in grid.unit_circle().into_iter().enumerate() {
        for (i, v) in basis.eval_at(z).into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    m
}

/// Convenience constructor mirroring [`ObfBasis::laguerre`].
pub fn laguerre_basis(a: f64, n: usize) -> Result<ObfBasis> {
    ObfBasis::laguerre(a, n)
}
