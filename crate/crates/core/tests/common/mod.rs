//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the algorithms under test beyond constructing
//! inputs: polynomials are evaluated by Horner's rule, closed-loop poles come
//! from eigenvalues of an explicitly assembled feedback state matrix.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use fdlpv_core::workflow::{self, Comparison, DesignOptions, EstimationOptions};
use fdlpv_core::{FrequencyGrid, FrfDataset, LpvSurrogateModel, RationalTf, SchedulingGrid, SynthesisProblem};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Horner evaluation of a descending-coefficient polynomial.
pub fn horner(p: &[f64], z: Complex64) -> Complex64 {
    p.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn tf_at(tf: &RationalTf, z: Complex64) -> Complex64 {
    horner(tf.num(), z) / horner(tf.den(), z)
}

/// Controllable canonical realization `(A, B, C, D)` of a proper SISO transfer function.
pub fn canonical(tf: &RationalTf) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let den: Vec<f64> = tf.den().iter().map(|c| c / tf.den()[0]).collect();
    let n = den.len() - 1;
    let mut num = vec![0.0; n + 1 - tf.num().len()];
    num.extend(tf.num().iter().map(|c| c / tf.den()[0]));
    let d = num[0];
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 1);
    let mut c = DMatrix::zeros(1, n);
    if n > 0 {
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den[n - j];
        }
        b[(n - 1, 0)] = 1.0;
        for j in 0..n {
            // numerator minus d * denominator, ascending order in the last row basis
            c[(0, j)] = num[n - j] - d * den[n - j];
        }
    }
    (a, b, c, d)
}

/// Poles of the negative-feedback loop of `g` and `k` from the eigenvalues
/// of the interconnected (non-minimal) realization. `None` for an ill-posed loop.
pub fn closed_loop_poles(g: &RationalTf, k: &RationalTf) -> Option<Vec<Complex64>> {
    let (a1, b1, c1, d1) = canonical(g);
    let (a2, b2, c2, d2) = canonical(k);
    let den = 1.0 + d1 * d2;
    if den.abs() < 1e-12 {
        return None;
    }
    let s = 1.0 / den;
    let (n1, n2) = (a1.nrows(), a2.nrows());
    let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
    // y = s (C1 x1 + D1 C2 x2), u = C2 x2 - D2 y, e = -y
    let y_x1 = &c1 * s;
    let y_x2 = &c2 * (s * d1);
    let u_x1 = &y_x1 * (-d2);
    let u_x2 = &c2 - &y_x2 * d2;
    a.view_mut((0, 0), (n1, n1)).copy_from(&(&a1 + &b1 * &u_x1));
    a.view_mut((0, n1), (n1, n2)).copy_from(&(&b1 * &u_x2));
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(-(&b2 * &y_x1)));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&(&a2 - &b2 * &y_x2));
    Some(a.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(poles: &[Complex64]) -> f64 {
    poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

/// Monic polynomial with the given roots (real coefficients assumed).
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        p = next;
    }
    p.iter().map(|c| c.re).collect()
}

/// Random roots: conjugate pairs or real values with modulus below `max_modulus`.
pub fn random_roots(rng: &mut impl Rng, n: usize, max_modulus: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let m = rng.random_range(0.0..max_modulus);
        if n - out.len() >= 2 && rng.random_bool(0.5) {
            let ang = rng.random_range(0.05..PI - 0.05);
            out.push(Complex64::from_polar(m, ang));
            out.push(Complex64::from_polar(m, -ang));
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            out.push(Complex64::new(sign * m, 0.0));
        }
    }
    out
}

/// Random proper transfer function of order `n` with poles of modulus below `max_modulus`.
pub fn random_tf(rng: &mut impl Rng, n: usize, max_modulus: f64, gain: f64) -> RationalTf {
    let den = poly_from_roots(&random_roots(rng, n, max_modulus));
    let num_deg = if n == 0 { 0 } else { rng.random_range(0..=n) };
    let num: Vec<f64> = (0..=num_deg).map(|_| gain * rng.random_range(-1.0..1.0)).collect();
    let num = if num.iter().all(|c| *c == 0.0) { vec![gain] } else { num };
    RationalTf::new(num, den, 1.0).expect("valid random transfer function")
}

/// `D_p` data for factors over `z^n`: `(dG dK + nG nK)(z) / z^n`.
pub fn characteristic_data(g: &RationalTf, k: &RationalTf, grid: &FrequencyGrid) -> Vec<Complex64> {
    let n = (g.den().len() - 1) + (k.den().len() - 1);
    grid.unit_circle()
        .into_iter()
        .map(|z| (horner(g.den(), z) * horner(k.den(), z) + horner(g.num(), z) * horner(k.num(), z)) / z.powu(n as u32))
        .collect()
}

/// Surrogate pipeline shared by several tests: estimated data on the
/// default 512-point grid at `p in {30, 40, 50}`.
pub struct Surrogate {
    pub model: LpvSurrogateModel,
    pub controller0: RationalTf,
    pub grid: Arc<FrequencyGrid>,
    pub scheduling: SchedulingGrid,
    pub dataset: FrfDataset,
    pub problem: SynthesisProblem,
}

pub fn surrogate() -> &'static Surrogate {
    static CELL: OnceLock<Surrogate> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = LpvSurrogateModel::default();
        let fs = model.sample_rate();
        let controller0 = workflow::default_controller0(fs).unwrap();
        let grid = workflow::default_grid(512, fs).unwrap();
        let scheduling = SchedulingGrid::new(vec![30.0, 40.0, 50.0], model.range()).unwrap();
        let dataset =
            workflow::estimate_dataset(&model, &controller0, &scheduling, &grid, &EstimationOptions::default()).unwrap();
        let weights = workflow::default_weights(fs).unwrap();
        let problem = workflow::build_problem(&dataset, &controller0, &weights, &DesignOptions::default()).unwrap();
        Surrogate { model, controller0, grid, scheduling, dataset, problem }
    })
}

/// LTI and LPV designs on the shared surrogate problem (computed once).
pub fn designs() -> &'static Comparison {
    static CELL: OnceLock<Comparison> = OnceLock::new();
    CELL.get_or_init(|| workflow::compare_lti_lpv(&surrogate().problem).unwrap())
}

/// Synthesis problem on exact model data: `n_freq` default-grid frequencies,
/// operating points `{30, 40, 50}`, Laguerre(0.7) bases of the given orders.
pub fn exact_problem(n_freq: usize, order_n: usize, order_d: usize) -> SynthesisProblem {
    let model = LpvSurrogateModel::default();
    let fs = model.sample_rate();
    let controller0 = workflow::default_controller0(fs).unwrap();
    let grid = workflow::default_grid(n_freq, fs).unwrap();
    let scheduling = SchedulingGrid::new(vec![30.0, 40.0, 50.0], model.range()).unwrap();
    let dataset = workflow::model_dataset(&model, &controller0, &scheduling, &grid).unwrap();
    let weights = workflow::default_weights(fs).unwrap();
    let design = DesignOptions { order_n, order_d, ..DesignOptions::default() };
    workflow::build_problem(&dataset, &controller0, &weights, &design).unwrap()
}
