use num_complex::Complex64;

use super::{cluster_poles, BasisBlock, ObfBasis};
use crate::error::{Error, Result};
use crate::poly;
use crate::synthesis::{bisect_gamma, ControllerParameters, SynthesisProblem, SynthesisResult};

/// Settings for iterative basis selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionOptions {
    /// Number of pole clusters per round.
    pub clusters: usize,
    pub fuzziness: f64,
    /// Roots are pulled inside this radius before clustering.
    pub max_modulus: f64,
    /// Stop once gamma improves by less than this fraction.
    pub min_improvement: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self { clusters: 3, fuzziness: 2.0, max_modulus: 0.99, min_improvement: 0.01 }
    }
}

#[derive(Clone, Debug)]
pub struct SelectionOutcome {
    /// Generating basis of the best iterate (its `D_K` basis).
    pub basis: ObfBasis,
    pub result: SynthesisResult,
    /// Gamma of every completed round, starting with round 0.
    pub gammas: Vec<f64>,
}

/// Zeros of the frozen `N_K` and `D_K` over all operating points, i.e. the
/// frozen controller zeros and poles when both factors share a basis.
pub fn controller_roots(params: &ControllerParameters, points: &[f64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for &p in points {
        let (nn, _) = params.frozen_factor_polys(p)?;
        let (nd, _) = params.frozen_d_polys(p)?;
        for r in poly::roots(&nn).into_iter().chain(poly::roots(&nd)) {
            if r.is_finite() {
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Builds a basis of `order` functions by cycling through cluster centers.
/// Centers with negligible imaginary part become real sections, the others
/// Kautz pairs. A single remaining slot is filled with a real section at the
/// center's real part.
pub fn basis_from_centers(centers: &[Complex64], order: usize) -> Result<ObfBasis> {
    if centers.is_empty() {
        return Err(Error::invalid("no centers to build a basis from"));
    }
    let mut sorted = centers.to_vec();
    sorted.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    let mut blocks = Vec::new();
    let mut count = 0;
    let mut k = 0;
    while count < order {
        let c = sorted[k % sorted.len()];
        k += 1;
        let block = if c.im.abs() < 1e-3 || order - count == 1 {
            BasisBlock::Real { pole: c.re }
        } else {
            BasisBlock::Pair { re: c.re, im: c.im.abs() }
        };
        count += block.functions();
        blocks.push(block);
    }
    ObfBasis::from_blocks(blocks, order)
}

fn prepare_samples(roots: &[Complex64], max_modulus: f64) -> Vec<Complex64> {
    roots
        .iter()
        .map(|&r| {
            let m = r.norm();
            let r = if m > max_modulus { r * (max_modulus / m) } else { r };
            Complex64::new(r.re, r.im.abs())
        })
        .collect()
}

/// Alternates synthesis with re-selection of basis poles from clustered
/// controller poles and zeros; returns the best basis and result found.
pub fn basis_selection_iterate(problem: &SynthesisProblem, max_rounds: usize) -> Result<(ObfBasis, SynthesisResult)> {
    let out = basis_selection_iterate_with(problem, max_rounds, SelectionOptions::default())?;
    Ok((out.basis, out.result))
}

pub fn basis_selection_iterate_with(
    problem: &SynthesisProblem,
    max_rounds: usize,
    opts: SelectionOptions,
) -> Result<SelectionOutcome> {
    let first = bisect_gamma(problem)?;
    let mut gammas = vec![first.gamma];
    let mut best = first.clone();
    let mut current = first;
    for _ in 0..max_rounds {
        let roots = controller_roots(&current.params, problem.scheduling.points())?;
        if roots.is_empty() {
            break;
        }
        let samples = prepare_samples(&roots, opts.max_modulus);
        let centers = cluster_poles(&samples, opts.clusters.min(samples.len()).max(1), opts.fuzziness)?;
        let basis_n = basis_from_centers(&centers, problem.basis_n.order())?;
        let basis_d = basis_from_centers(&centers, problem.basis_d.order())?;
        let next_problem = problem.with_bases(basis_n, basis_d)?;
        let next = match bisect_gamma(&next_problem) {
            Ok(r) => r,
            Err(Error::Infeasible(_)) => break,
            Err(e) => return Err(e),
        };
        gammas.push(next.gamma);
        let improved = next.gamma < best.gamma * (1.0 - opts.min_improvement);
        if next.gamma < best.gamma {
            best = next.clone();
        }
        if !improved {
            break;
        }
        current = next;
    }
    Ok(SelectionOutcome { basis: best.params.basis_d.clone(), result: best, gammas })
}
