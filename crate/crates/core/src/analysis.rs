//! A-posteriori certification of frozen closed loops from frequency data,
//! achieved performance, and a symbolic internal-stability oracle.
//!
//! Certificates search a stable multiplier `alpha = 1 + sum c_j phi_j` with
//! `Re{D alpha} - r |alpha| >= eps` on the grid, where `r` is zero for
//! stability and the weighted-disc radius `max_c |W_c N_c| / gamma` for
//! performance. Refutation needs an explicit witness: a disc that contains
//! the origin at a grid frequency, or a negative winding number of `D`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{Channel, ClosedLoopFactorData};
use crate::frf::FrequencyGrid;
use crate::obf::{eval_basis, BasisBlock, ObfBasis};
use crate::poly;
use crate::rational::RationalTf;
use crate::socp::{Affine, ConeProgram, SolveStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub multiplier_pole: f64,
    pub multiplier_order: usize,
    pub eps: f64,
    /// Retry with multiplier poles placed near dips of `|D|` before giving up.
    pub escalate: bool,
    pub max_dips: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { multiplier_pole: 0.5, multiplier_order: 8, eps: 1e-9, escalate: true, max_dips: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateStatus {
    Certified,
    Refuted,
    Inconclusive,
}

/// `alpha = sum_i coeffs[i] phi_i` with `coeffs[0] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierParameters {
    pub basis: ObfBasis,
    pub coeffs: Vec<f64>,
}

impl MultiplierParameters {
    /// `alpha = 1`.
    pub fn identity() -> Self {
        Self { basis: ObfBasis::laguerre(0.0, 0).expect("empty basis"), coeffs: vec![1.0] }
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&c| c == 0.0)
    }

    pub fn eval(&self, grid: &FrequencyGrid) -> Vec<Complex64> {
        let phi = eval_basis(&self.basis, grid);
        (0..grid.len())
            .map(|k| self.coeffs.iter().enumerate().map(|(i, &c)| phi[(i, k)] * c).sum())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The uncertainty disc (or, for stability, a vanishing `D`) touches the origin.
    DiscContainsOrigin { omega: f64, distance: f64 },
    /// `D` winds clockwise around the origin along the unit circle.
    Winding { winding: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCertificate {
    pub p_index: usize,
    pub status: CertificateStatus,
    /// `Re{D alpha} - r |alpha|` per frequency for the best multiplier tried.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub multiplier: Option<MultiplierParameters>,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: CertificateStatus,
    pub points: Vec<PointCertificate>,
    pub eps: f64,
    pub gamma: Option<f64>,
    pub grid_size: usize,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Certificate {
    fn combine(points: Vec<PointCertificate>, grid: &FrequencyGrid, eps: f64, gamma: Option<f64>) -> Self {
        let status = if points.iter().any(|p| p.status == CertificateStatus::Refuted) {
            CertificateStatus::Refuted
        } else if points.iter().all(|p| p.status == CertificateStatus::Certified) {
            CertificateStatus::Certified
        } else {
            CertificateStatus::Inconclusive
        };
        Self {
            status,
            points,
            eps,
            gamma,
            grid_size: grid.len(),
            omega_min: grid.omegas()[0],
            omega_max: grid.omegas()[grid.len() - 1],
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.points.iter().map(|p| p.min_margin).fold(f64::INFINITY, f64::min)
    }
}

fn wrap(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Winding number of `D(e^{i omega})` about the origin over the full circle,
/// from samples on `[0, pi]` and conjugate symmetry of real-coefficient data.
pub fn winding_number(d: &[Complex64]) -> i64 {
    if d.is_empty() {
        return 0;
    }
    let th: Vec<f64> = d.iter().map(|v| v.arg()).collect();
    let delta: f64 = th.windows(2).map(|w| wrap(w[1] - w[0])).sum();
    let n = th.len();
    let total = 2.0 * delta + wrap(2.0 * th[0]) + wrap(-2.0 * th[n - 1]);
    (total / (2.0 * PI)).round() as i64
}

fn margins_for(d: &[Complex64], r: &[f64], alpha: &[Complex64]) -> Vec<f64> {
    d.iter()
        .zip(r)
        .zip(alpha)
        .map(|((d, &r), a)| (d * a).re - r * a.norm())
        .collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Best multiplier in `basis` by maximizing the smallest normalized margin.
fn search_multiplier(
    d: &[Complex64],
    r: &[f64],
    grid: &FrequencyGrid,
    basis: &ObfBasis,
) -> Result<Option<MultiplierParameters>> {
    let phi = eval_basis(basis, grid);
    let n = basis.order();
    let t = n;
    let mut cp = ConeProgram::new(n + 1);
    cp.set_objective(t, -1.0);
    cp.add_nonneg(Affine::new(vec![(t, -1.0)], 1.0));
    for k in 0..d.len() {
        let s = 1.0 / d[k].norm();
        let u = d[k] * s;
        let rho = r[k] * s;
        let coef: Vec<f64> = (1..=n).map(|i| (u * phi[(i, k)]).re).collect();
        let head = Affine::dense(&coef, u.re).with_term(t, -1.0);
        if rho > 0.0 {
            let re: Vec<f64> = (1..=n).map(|i| rho * phi[(i, k)].re).collect();
            let im: Vec<f64> = (1..=n).map(|i| rho * phi[(i, k)].im).collect();
            cp.add_soc(head, vec![Affine::dense(&re, rho), Affine::dense(&im, 0.0)]);
        } else {
            cp.add_nonneg(head);
        }
    }
    let out = cp.solve()?;
    match out.status {
        SolveStatus::Infeasible => Ok(None),
        _ if out.x.iter().any(|v| !v.is_finite()) => Ok(None),
        _ => {
            let mut coeffs = vec![1.0];
            coeffs.extend_from_slice(&out.x[..n]);
            Ok(Some(MultiplierParameters { basis: basis.clone(), coeffs }))
        }
    }
}

/// Locates pronounced local minima of `|D|` and estimates the nearby zero
/// `rho e^{i w0}` from `|D|^2 ~ A (1 + rho^2 - 2 rho cos(w - w0))` through
/// three neighbouring samples.
fn dip_poles(d: &[Complex64], grid: &FrequencyGrid, max_dips: usize) -> Vec<BasisBlock> {
    let om = grid.omegas();
    let mag: Vec<f64> = d.iter().map(|v| v.norm()).collect();
    let mut sorted = mag.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let mut dips: Vec<(f64, usize)> = (1..mag.len().saturating_sub(1))
        .filter(|&k| mag[k] <= mag[k - 1] && mag[k] <= mag[k + 1] && mag[k] < 0.5 * median)
        .map(|k| (mag[k] / median, k))
        .collect();
    dips.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut blocks = Vec::new();
    for &(_, k) in dips.iter().take(max_dips) {
        let (w, y): (Vec<f64>, Vec<f64>) = (k - 1..=k + 1).map(|j| (om[j], mag[j] * mag[j])).unzip();
        let m = nalgebra::Matrix3::from_fn(|i, j| match j {
            0 => 1.0,
            1 => w[i].cos(),
            _ => w[i].sin(),
        });
        let rhs = nalgebra::Vector3::new(y[0], y[1], y[2]);
        let (mut rho, mut w0) = (0.999, om[k]);
        if let Some(sol) = m.lu().solve(&rhs) {
            let (a, b, c) = (sol[0], sol[1], sol[2]);
            let big_r = 0.5 * b.hypot(c);
            if a > 2.0 * big_r && big_r > 0.0 {
                rho = (a - (a * a - 4.0 * big_r * big_r).sqrt()) / (2.0 * big_r);
                w0 = (-c).atan2(-b);
            }
        }
        let rho = rho.clamp(0.0, 0.9995);
        let spacing = (om[k + 1] - om[k - 1]).abs();
        let block = if w0.abs() < 0.5 * spacing || (PI - w0.abs()) < 0.5 * spacing {
            BasisBlock::Real { pole: if w0.abs() < PI / 2.0 { rho } else { -rho } }
        } else {
            BasisBlock::Pair { re: rho * w0.cos(), im: rho * w0.sin().abs() }
        };
        blocks.push(block);
    }
    blocks
}

fn certify_point(
    p_index: usize,
    d: &[Complex64],
    r: &[f64],
    grid: &FrequencyGrid,
    opts: &AnalysisOptions,
) -> Result<PointCertificate> {
    let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let om = grid.omegas();
    // Refutation: disc through the origin at a grid frequency.
    let mut worst: Option<(usize, f64)> = None;
    for k in 0..d.len() {
        let dist = d[k].norm() - r[k];
        let degenerate = if r[k] > 0.0 { dist <= 0.0 } else { d[k].norm() <= 1e-12 * scale };
        if degenerate && worst.is_none_or(|(_, w)| dist < w) {
            worst = Some((k, dist));
        }
    }
    let identity = vec![Complex64::new(1.0, 0.0); d.len()];
    if let Some((k, dist)) = worst {
        let margins = margins_for(d, r, &identity);
        return Ok(PointCertificate {
            p_index,
            status: CertificateStatus::Refuted,
            min_margin: min_of(&margins),
            margins,
            multiplier: None,
            witness: Some(Witness::DiscContainsOrigin { omega: om[k], distance: dist }),
        });
    }
    // Data of a stable characteristic function wind non-positively; a
    // negative count means zeros outside the disk (or at infinity).
    let winding = winding_number(d);
    if winding < 0 {
        let margins = margins_for(d, r, &identity);
        return Ok(PointCertificate {
            p_index,
            status: CertificateStatus::Refuted,
            min_margin: min_of(&margins),
            margins,
            multiplier: None,
            witness: Some(Witness::Winding { winding }),
        });
    }

    let mut best_margins = margins_for(d, r, &identity);
    let mut best_alpha = MultiplierParameters::identity();
    if min_of(&best_margins) >= opts.eps {
        return Ok(PointCertificate {
            p_index,
            status: CertificateStatus::Certified,
            min_margin: min_of(&best_margins),
            margins: best_margins,
            multiplier: Some(best_alpha),
            witness: None,
        });
    }

    let mut candidates = vec![ObfBasis::laguerre(opts.multiplier_pole, opts.multiplier_order)?];
    if opts.escalate {
        let dips = dip_poles(d, grid, opts.max_dips);
        let generic = vec![BasisBlock::Real { pole: opts.multiplier_pole }; opts.multiplier_order];
        if !dips.is_empty() {
            let mut blocks = dips.clone();
            blocks.extend(generic.iter().copied());
            let order = blocks.iter().map(|b| b.functions()).sum();
            candidates.push(ObfBasis::from_blocks(blocks, order)?);
        }
        let mut wide = dips;
        for pole in [0.9, -0.5, 0.0, 0.97] {
            wide.extend(std::iter::repeat_n(BasisBlock::Real { pole }, 4));
        }
        wide.extend(generic);
        let order = wide.iter().map(|b| b.functions()).sum();
        candidates.push(ObfBasis::from_blocks(wide, order)?);
    }
    for basis in candidates {
        if let Some(alpha) = search_multiplier(d, r, grid, &basis)? {
            let a = alpha.eval(grid);
            let margins = margins_for(d, r, &a);
            if min_of(&margins) > min_of(&best_margins) {
                best_margins = margins;
                best_alpha = alpha;
            }
            if min_of(&best_margins) >= opts.eps {
                break;
            }
        }
    }
    let certified = min_of(&best_margins) >= opts.eps;
    Ok(PointCertificate {
        p_index,
        status: if certified { CertificateStatus::Certified } else { CertificateStatus::Inconclusive },
        min_margin: min_of(&best_margins),
        margins: best_margins,
        multiplier: certified.then_some(best_alpha),
        witness: None,
    })
}

/// Stability certificate from characteristic data `D_p` per operating point.
pub fn check_stability(dp: &[Vec<Complex64>], grid: &FrequencyGrid, opts: &AnalysisOptions) -> Result<Certificate> {
    let mut points = Vec::with_capacity(dp.len());
    for (i, d) in dp.iter().enumerate() {
        if d.len() != grid.len() {
            return Err(Error::GridMismatch(format!("D_p at point {i} has {} values, grid {}", d.len(), grid.len())));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite D_p data at point {i}")));
        }
        points.push(certify_point(i, d, &vec![0.0; d.len()], grid, opts)?);
    }
    Ok(Certificate::combine(points, grid, opts.eps, None))
}

/// Weighted-disc radius `max_c |W_c N_c| / gamma` per frequency.
pub fn performance_radii(data: &ClosedLoopFactorData, weights: &[Vec<Complex64>; 4], gamma: f64) -> Vec<f64> {
    (0..data.len())
        .map(|k| {
            Channel::ALL
                .iter()
                .map(|c| (weights[c.index()][k] * data.numerator(*c)[k]).norm())
                .fold(0.0, f64::max)
                / gamma
        })
        .collect()
}

/// Performance certificate at level `gamma`, all channels jointly with a
/// shared multiplier per operating point.
pub fn check_performance(
    data: &[ClosedLoopFactorData],
    weights: &[Vec<Complex64>; 4],
    gamma: f64,
    grid: &FrequencyGrid,
    opts: &AnalysisOptions,
) -> Result<Certificate> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if weights.iter().any(|w| w.len() != grid.len()) {
        return Err(Error::GridMismatch("weights do not match the grid".into()));
    }
    let mut points = Vec::with_capacity(data.len());
    for (i, dat) in data.iter().enumerate() {
        if dat.len() != grid.len() {
            return Err(Error::GridMismatch(format!("data at point {i} do not match the grid")));
        }
        let r = performance_radii(dat, weights, gamma);
        points.push(certify_point(i, &dat.d_p, &r, grid, opts)?);
    }
    Ok(Certificate::combine(points, grid, opts.eps, Some(gamma)))
}

/// `max |W_c N_p^c / D_p|` over frequencies, operating points and channels.
pub fn compute_achieved_gamma(data: &[ClosedLoopFactorData], weights: &[Vec<Complex64>; 4]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, dat) in data.iter().enumerate() {
        for k in 0..dat.len() {
            let d = dat.d_p[k].norm();
            if !(d > 0.0) {
                return Err(Error::Numerical(format!("D_p vanishes at point {i}, frequency index {k}")));
            }
            for c in Channel::ALL {
                worst = worst.max((weights[c.index()][k] * dat.numerator(c)[k]).norm() / d);
            }
        }
    }
    Ok(worst)
}

/// Unreduced closed-loop characteristic polynomial `dG dK + nG nK`.
pub fn characteristic_polynomial(g: &RationalTf, k: &RationalTf) -> Vec<f64> {
    poly::add(&poly::mul(g.den(), k.den()), &poly::mul(g.num(), k.num()))
}

/// `D_p` data for the factorization with both factors over `z^n`,
/// `n = deg dG + deg dK`: `D_p(z) = (dG dK + nG nK)(z) / z^n`.
pub fn characteristic_data(g: &RationalTf, k: &RationalTf, grid: &FrequencyGrid) -> Vec<Complex64> {
    let p = characteristic_polynomial(g, k);
    let n = (g.den().len() - 1) + (k.den().len() - 1);
    let p = poly::pad_to(&p, n + 1);
    grid.unit_circle()
        .into_iter()
        .map(|z| poly::eval(&p, z) / z.powu(n as u32))
        .collect()
}

/// Internal stability of the loop `(G, K)` from the four closed-loop maps.
///
/// All four share the unreduced denominator `dG dK + nG nK`; pole-zero
/// cancellations between `G` and `K` therefore stay visible. A drop of its
/// degree (ill-posed loop, `1 + G K` vanishing at infinity) counts as
/// unstable. Inputs are taken as coprime representations.
pub fn oracle_stability(g: &RationalTf, k: &RationalTf) -> Result<bool> {
    let p = characteristic_polynomial(g, k);
    let scale = g.den().iter().chain(k.den()).chain(g.num()).chain(k.num()).fold(0.0_f64, |m, c| m.max(c.abs()));
    if poly::is_zero(&poly::trim_tol(&p, scale * scale, 1e-14)) {
        return Err(Error::Numerical("1 + G K vanishes identically".into()));
    }
    let nominal = (g.den().len() - 1) + (k.den().len() - 1);
    let lead = p[0];
    if lead.abs() <= 1e-12 * scale * scale || poly::degree(&p) < nominal {
        return Ok(false);
    }
    Ok(poly::roots(&p).iter().all(|r| r.norm() < 1.0))
}

/// Largest closed-loop pole modulus of `(G, K)`.
pub fn closed_loop_spectral_radius(g: &RationalTf, k: &RationalTf) -> f64 {
    poly::roots(&characteristic_polynomial(g, k)).iter().map(|r| r.norm()).fold(0.0, f64::max)
}
