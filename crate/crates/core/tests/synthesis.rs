mod common;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use common::{exact_problem, horner};
use fdlpv_core::factorization::frozen_coprime_from_model;
use fdlpv_core::poly;
use fdlpv_core::realization::simulate_frozen_lti;
use fdlpv_core::synthesis::{
    add_integral_action, assemble_constraints, bisect, feasibility_solve, normalization_equalities,
    problem_equalities, solve_at_gamma, BisectionMode, EqualitySet, Feasibility,
};
use fdlpv_core::{
    assemble_closed_loop, bisect_gamma, evaluate_factors, Channel, ControllerParameters, CoprimeFrfPair, Error,
    FrequencyGrid, FrfResponse, LpvSurrogateModel, ObfBasis, RationalTf, SchedulingBasis, SchedulingGrid,
    SynthesisOptions, SynthesisProblem, SynthesisResult, TimeRecord, Weight, WeightSet,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_weights() -> WeightSet {
    let one = || Weight::Rational(RationalTf::constant(1.0, 1.0).unwrap());
    WeightSet::new(one(), one(), one(), one()).unwrap()
}

fn single_point_problem(
    pair: CoprimeFrfPair,
    order_n: usize,
    order_d: usize,
    weights: WeightSet,
    options: SynthesisOptions,
) -> SynthesisProblem {
    SynthesisProblem::new(
        vec![pair],
        SchedulingGrid::new(vec![0.0], (0.0, 0.0)).unwrap(),
        SchedulingBasis::constant((0.0, 0.0)).unwrap(),
        ObfBasis::laguerre(0.5, order_n).unwrap(),
        ObfBasis::laguerre(0.5, order_d).unwrap(),
        weights,
        options,
    )
    .unwrap()
}

/// Factors of `G = 1 / (z - 2)` with `K0 = 2` at the given frequencies.
fn unstable_pair(omegas: Vec<f64>) -> CoprimeFrfPair {
    let grid = Arc::new(FrequencyGrid::new(omegas, None).unwrap());
    let g = RationalTf::new(vec![1.0], vec![1.0, -2.0], 1.0).unwrap();
    frozen_coprime_from_model(&g, &RationalTf::constant(2.0, 1.0).unwrap(), &grid).unwrap().0
}

fn random_params(rng: &mut impl Rng, problem: &SynthesisProblem) -> ControllerParameters {
    let m = problem.scheduling_basis.len();
    let w = (0..problem.basis_n.len()).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut v: Vec<Vec<f64>> =
        (0..problem.basis_d.len()).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    v[0] = (0..m).map(|l| if l == 0 { 1.0 } else { 0.0 }).collect();
    ControllerParameters::new(
        w,
        v,
        problem.basis_n.clone(),
        problem.basis_d.clone(),
        problem.scheduling_basis.clone(),
    )
    .unwrap()
}

/// Small exact-data surrogate problem (48 frequencies, orders 2/2, integral action).
fn small() -> &'static SynthesisProblem {
    static CELL: OnceLock<SynthesisProblem> = OnceLock::new();
    CELL.get_or_init(|| exact_problem(48, 2, 2))
}

fn small_lpv() -> &'static SynthesisResult {
    static CELL: OnceLock<SynthesisResult> = OnceLock::new();
    CELL.get_or_init(|| bisect_gamma(small()).unwrap())
}

#[test]
fn zero_controller_factors() {
    let problem = small();
    let theta = ControllerParameters::zero(
        problem.basis_n.clone(),
        problem.basis_d.clone(),
        problem.scheduling_basis.clone(),
    );
    let (nk, dk) = evaluate_factors(&theta, 35.0, &problem.grid).unwrap();
    assert!(nk.iter().all(|v| v.norm() == 0.0));
    assert!(dk.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
}

#[test]
fn lti_factors_do_not_depend_on_scheduling() {
    let problem = small().lti().unwrap();
    let theta = random_params(&mut ChaCha8Rng::seed_from_u64(3), &problem);
    let a = evaluate_factors(&theta, 30.0, &problem.grid).unwrap();
    let b = evaluate_factors(&theta, 50.0, &problem.grid).unwrap();
    assert_eq!(a, b);
}

#[test]
fn factor_evaluation_matches_the_rational_form() {
    let problem = small();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let theta = random_params(&mut rng, problem);
        for p in [30.0, 37.5, 50.0] {
            let (nk, dk) = evaluate_factors(&theta, p, &problem.grid).unwrap();
            let (n_num, n_den) = theta.frozen_factor_polys(p).unwrap();
            let (d_num, d_den) = theta.frozen_d_polys(p).unwrap();
            for (k, z) in problem.grid.unit_circle().into_iter().enumerate() {
                assert!((nk[k] - horner(&n_num, z) / horner(&n_den, z)).norm() < 1e-10);
                assert!((dk[k] - horner(&d_num, z) / horner(&d_den, z)).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn constraint_count_and_cross_check_with_closed_loop_data() {
    let problem = small();
    let cons = assemble_constraints(problem, 1.7).unwrap();
    assert_eq!(cons.count(), problem.grid.len() * problem.scheduling.len() * 4);
    let weights = problem.weights.eval(&problem.grid).unwrap();
    let theta = random_params(&mut ChaCha8Rng::seed_from_u64(5), problem);
    let x = theta.to_vector();
    let margins = cons.margins(&x);
    for (pi, &p) in problem.scheduling.points().iter().enumerate() {
        let (nk, dk) = evaluate_factors(&theta, p, &problem.grid).unwrap();
        let data = assemble_closed_loop(&problem.pairs[pi], &nk, &dk).unwrap();
        for k in 0..problem.grid.len() {
            let block = pi * problem.grid.len() + k;
            for c in Channel::ALL {
                let expect = data.d_p[k].re - cons.eps - (weights[c.index()][k] * data.numerator(c)[k]).norm() / 1.7;
                let got = margins[block * 4 + c.index()];
                assert!((got - expect).abs() < 1e-10 * (1.0 + expect.abs()), "p {p}, k {k}, {c:?}");
            }
        }
    }
}

#[test]
fn margins_are_affine_under_finite_differences() {
    let problem = small();
    let cons = assemble_constraints(problem, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..cons.n_vars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dir: Vec<f64> = (0..cons.n_vars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let at = |t: f64| x.iter().zip(&dir).map(|(a, b)| a + t * b).collect::<Vec<_>>();
    for blk in &cons.blocks {
        let d = |y: &[f64]| blk.d.iter().zip(y).map(|(c, v)| c * v).sum::<Complex64>();
        let (d0, d1, d2) = (d(&at(0.0)), d(&at(1e-3)), d(&at(2e-3)));
        // Second difference of an affine map vanishes.
        assert!((d2 - 2.0 * d1 + d0).norm() < 1e-9 * (1.0 + d0.norm()));
        for c in Channel::ALL {
            let n = |y: &[f64]| blk.n[c.index()].iter().zip(y).map(|(a, v)| a * v).sum::<Complex64>();
            let (n0, n1, n2) = (n(&at(0.0)), n(&at(1e-3)), n(&at(2e-3)));
            assert!((n2 - 2.0 * n1 + n0).norm() < 1e-9 * (1.0 + n0.norm()));
        }
    }
}

#[test]
fn hand_assembled_constraint_on_the_first_order_example() {
    let w = 0.9;
    let pair = unstable_pair(vec![w]);
    let opts = SynthesisOptions { eps: Some(1e-3), ..SynthesisOptions::default() };
    let problem = single_point_problem(pair, 0, 0, unit_weights(), opts);
    let cons = assemble_constraints(&problem, 2.0).unwrap();
    assert_eq!(cons.count(), 4);
    // theta = [w_0, v_0] = [1.5, 1]: D_p = (z - 0.5) / z, T numerator 1.5 / z.
    let z = Complex64::from_polar(1.0, w);
    let d_p = (z - 0.5) / z;
    let margins = cons.margins(&[1.5, 1.0]);
    let t_margin = d_p.re - 1e-3 - 1.5 / 2.0;
    assert!((margins[Channel::T.index()] - t_margin).abs() < 1e-14);
    let s_margin = d_p.re - 1e-3 - ((z - 2.0) / z).norm() / 2.0;
    assert!((margins[Channel::S.index()] - s_margin).abs() < 1e-14);

    // Large gamma leaves only Re{D_p} >= eps.
    let loose = cons.at_gamma(1e12).margins(&[1.5, 1.0]);
    for m in loose {
        assert!((m - (d_p.re - 1e-3)).abs() < 1e-11);
    }
}

#[test]
fn witness_makes_stability_only_constraints_feasible() {
    let pair = unstable_pair((1..=64).map(|k| k as f64 * PI / 64.0).collect());
    let problem = single_point_problem(pair, 0, 0, unit_weights(), SynthesisOptions::default());
    let cons = assemble_constraints(&problem, 1e9).unwrap();
    // The Bezout witness (K = 2) gives D_p = 1.
    assert!(cons.min_margin(&[2.0, 1.0]) > 0.0);
    let eqs = normalization_equalities(&problem);
    match feasibility_solve(&cons, &eqs).unwrap() {
        Feasibility::Feasible { theta, margin, .. } => {
            assert!(margin >= 0.0);
            assert!((theta[1] - 1.0).abs() < 1e-9);
            assert!(cons.min_margin(&theta) >= 0.0);
        }
        other => panic!("expected feasible, got {other:?}"),
    }
}

#[test]
fn contradictory_equalities_are_infeasible() {
    let pair = unstable_pair(vec![0.5, 1.0]);
    let problem = single_point_problem(pair, 0, 0, unit_weights(), SynthesisOptions::default());
    let cons = assemble_constraints(&problem, 10.0).unwrap();
    let mut eqs = EqualitySet::default();
    eqs.push(vec![0.0, 1.0], 1.0);
    eqs.push(vec![0.0, 1.0], 0.0);
    assert!(matches!(feasibility_solve(&cons, &eqs), Err(Error::Infeasible(_))));
}

#[test]
fn zero_plant_cannot_push_sensitivity_below_one() {
    let grid = Arc::new(FrequencyGrid::linspace(0.1, 3.0, 16, None).unwrap());
    let pair = CoprimeFrfPair::new(
        FrfResponse::constant(Complex64::new(0.0, 0.0), grid.clone()).unwrap(),
        FrfResponse::constant(Complex64::new(1.0, 0.0), grid).unwrap(),
    )
    .unwrap();
    let zero = || Weight::Rational(RationalTf::constant(0.0, 1.0).unwrap());
    let weights =
        WeightSet::new(Weight::Rational(RationalTf::constant(1.0, 1.0).unwrap()), zero(), zero(), zero()).unwrap();
    let problem = single_point_problem(pair, 1, 1, weights, SynthesisOptions::default());
    let eqs = normalization_equalities(&problem);
    let tight = assemble_constraints(&problem, 0.5).unwrap();
    assert!(!feasibility_solve(&tight, &eqs).unwrap().is_feasible());
    // Any gamma above one is attainable with K = 0.
    assert!(feasibility_solve(&tight.at_gamma(1.01), &eqs).unwrap().is_feasible());
}

#[test]
fn bisection_arithmetic() {
    let out = bisect(1.0, 4.0, 0.5, BisectionMode::Absolute, |g| Ok(g >= 2.0)).unwrap();
    assert!(out.iterations <= 3);
    assert!(out.hi - out.lo <= 0.5 && out.hi >= 2.0);
    assert!(matches!(bisect(1.0, 4.0, 0.5, BisectionMode::Absolute, |_| Ok(false)), Err(Error::Infeasible(_))));
}

#[test]
fn integral_action_places_a_controller_pole_at_one() {
    let res = small_lpv();
    for &p in small().scheduling.points() {
        let (d_num, _) = res.params.frozen_d_polys(p).unwrap();
        let nearest = poly::roots(&d_num).iter().map(|r| (r - 1.0).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-8, "p {p}: nearest root at distance {nearest:e}");
    }
    let eqs = problem_equalities(small()).unwrap();
    assert!(eqs.max_residual(&res.params.to_vector()) < 1e-8);
}

#[test]
fn integral_action_needs_a_dynamic_denominator() {
    let pair = unstable_pair(vec![0.5, 1.0]);
    let opts = SynthesisOptions { integral_action: true, ..SynthesisOptions::default() };
    let problem = single_point_problem(pair, 0, 0, unit_weights(), opts);
    assert!(matches!(add_integral_action(&problem), Err(Error::Infeasible(_))));
    assert!(matches!(bisect_gamma(&problem), Err(Error::Infeasible(_))));

    let with_dc = unstable_pair(vec![0.0, 1.0]);
    let opts = SynthesisOptions { integral_action: true, ..SynthesisOptions::default() };
    let problem = single_point_problem(with_dc, 1, 1, unit_weights(), opts);
    assert!(add_integral_action(&problem).is_err());
}

#[test]
fn integral_action_removes_steady_state_error() {
    let model = LpvSurrogateModel::default();
    let fs = model.sample_rate();
    let res = small_lpv();
    for &p in small().scheduling.points() {
        let k = res.params.frozen_controller(p, fs).unwrap();
        let n = (30.0 * fs) as usize;
        let r = TimeRecord::new(vec![1.0; n], fs, "r").unwrap();
        let d = TimeRecord::new(vec![0.0; n], fs, "d").unwrap();
        let trace = simulate_frozen_lti(&model, &k, p, &r, &d).unwrap();
        let e_end = trace.e[n - 1].abs();
        assert!(e_end < 1e-3, "p {p}: steady-state error {e_end:e}");
    }
}

#[test]
fn returned_design_is_sound() {
    let problem = small();
    let res = small_lpv();
    assert!(res.min_margin >= 0.0);
    assert!(res.margins.iter().all(|m| *m >= 0.0));
    assert!(res.achieved_gamma <= res.gamma * (1.0 + 1e-9));
    let cons = assemble_constraints(problem, res.gamma).unwrap();
    assert!(cons.min_re_d(&res.params.to_vector()) >= cons.eps);
    // One bisection step below the returned value is infeasible.
    let below = res.gamma / (1.0 + 2.0 * problem.options.tolerance);
    assert!(solve_at_gamma(problem, below).unwrap().is_none());
}

#[test]
fn scheduling_dependence_does_not_hurt() {
    let lti = bisect_gamma(&small().lti().unwrap()).unwrap();
    let lpv = small_lpv();
    assert!(lpv.gamma <= lti.gamma * (1.0 + small().options.tolerance), "{} vs {}", lpv.gamma, lti.gamma);
}

#[test]
fn infeasible_upper_bound_is_reported() {
    let mut problem = small().clone();
    problem.options.gamma_bounds = (1e-3, 0.5);
    assert!(matches!(bisect_gamma(&problem), Err(Error::Infeasible(_))));
}

#[test]
fn weights_reject_unstable_filters() {
    let unstable = Weight::Rational(RationalTf::new(vec![1.0], vec![1.0, -1.1], 1.0).unwrap());
    let one = || Weight::Rational(RationalTf::constant(1.0, 1.0).unwrap());
    assert!(WeightSet::new(unstable, one(), one(), one()).is_err());
    let other = Arc::new(FrequencyGrid::linspace(0.1, 1.0, 3, None).unwrap());
    let tab = Weight::Tabulated(FrfResponse::constant(Complex64::new(1.0, 0.0), other).unwrap());
    assert!(matches!(tab.eval(&FrequencyGrid::linspace(0.1, 1.0, 4, None).unwrap()), Err(Error::GridMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasibility_is_monotone_in_gamma(a in 0.0..0.35f64, b in 0.0..0.35f64) {
        let problem = small();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (g_lo, g_hi) = (10f64.powf(lo), 10f64.powf(hi));
        let f_lo = solve_at_gamma(problem, g_lo).unwrap().is_some();
        let f_hi = solve_at_gamma(problem, g_hi).unwrap().is_some();
        prop_assert!(!f_lo || f_hi, "feasible at {} but not at {}", g_lo, g_hi);
    }
}
