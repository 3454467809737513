mod common;

use common::{simulate, terminal_innovation, within};
use recutil::kignorance::{
    cara_saddle, deterministic_mu_minimizer, expectation_under, gauss_hermite_normal, kignorance_utility, log_saddle,
    small_mu_case, KScenario,
};
use recutil::{
    solve_bsde, solve_dual, BsdeConfig, ControlProcess, DeterministicDrift, DriftModel, DualOptions, GeneratorSpec,
    RegressionState, UtilitySpec,
};

#[test]
fn negative_ambiguity_is_rejected_everywhere() {
    assert!(GeneratorSpec::k_ignorance(-0.1).is_err());
    assert!(KScenario::new(-0.1, UtilitySpec::log(), 1.0).is_err());
    assert!(deterministic_mu_minimizer(&DeterministicDrift::constant(0.2), -0.1).is_err());
}

#[test]
fn known_drift_minimizer_clamps() {
    let drift = DeterministicDrift::from_fn("sine", |t: f64, _| 0.3 * (2.0 * std::f64::consts::PI * t).sin());
    let m = deterministic_mu_minimizer(&drift, 0.1).unwrap();
    assert_eq!(m.value(0.25), -0.1);
    assert_eq!(m.value(0.75), 0.1);
    assert!((m.value(0.01) + 0.3 * (0.02 * std::f64::consts::PI).sin()).abs() < 1e-15);
}

#[test]
fn exponential_saddle_in_closed_form() {
    let sim = simulate(&DriftModel::constant(0.2), 1.0, 50, 4000, 51);
    let scn = KScenario::new(0.1, UtilitySpec::cara(1.0).unwrap(), 1.0).unwrap();
    let rec = cara_saddle(&scn, &sim.fm).unwrap();
    let zeta = (-1.0f64 - 0.005).exp();
    assert!(rec.zeta_hat.exact);
    assert!((rec.zeta_hat.value - zeta).abs() < 1e-12);
    assert!((rec.y0.value - (1.0 - zeta)).abs() < 1e-12);
    assert!(rec.prior.gamma_hat().iter().all(|g| *g == -0.1));
    // ξ̂ is affordable: E[L(T) ξ̂] = x
    let n = sim.fm.n_steps();
    let spent: Vec<f64> = rec.xi_hat.iter().enumerate().map(|(p, v)| sim.fm.l_hat(n, p) * v).collect();
    let e = recutil::Estimate::from_samples(&spent);
    assert!(within(e.value, 1.0, e.stderr, 4.0, 0.0), "budget {}", e.value);
}

#[test]
fn logarithmic_saddle_in_closed_form() {
    let sim = simulate(&DriftModel::constant(0.2), 1.0, 50, 4000, 52);
    for x in [1.0f64, 2.0, 2.5] {
        let scn = KScenario::new(0.1, UtilitySpec::log(), x).unwrap();
        let rec = log_saddle(&scn, &sim.fm, &BsdeConfig::default()).unwrap();
        assert!((rec.zeta_hat - 1.0 / x).abs() <= 1e-15, "x {x}: {}", rec.zeta_hat);
        assert!(rec.prior.gamma_hat().iter().all(|g| *g == -0.1));
        let exact = x.ln() + 0.5 * 0.1 * 0.1;
        assert!(within(rec.y0.value, exact, rec.y0.stderr, 4.0, 1e-3), "{} vs {exact}", rec.y0.value);
        assert!(within(rec.budget.value, x, rec.budget.stderr, 4.0, 0.0));
    }
}

#[test]
fn drift_inside_the_band_leaves_wealth_riskless() {
    let sim = simulate(&DriftModel::constant(0.05), 1.0, 20, 1000, 53);
    let util = UtilitySpec::cara(2.0).unwrap();
    let scn = KScenario::new(0.1, util.clone(), 1.5).unwrap();
    let sol = small_mu_case(&scn, &sim.fm, &DualOptions::default()).unwrap();
    assert!(sol.xi_hat.iter().all(|v| *v == 1.5));
    assert!(sol.v_lower.exact);
    assert_eq!(sol.v_lower.value, util.u(1.5));
    assert_eq!(sol.zeta_hat, util.u_prime(1.5));

    let outside = simulate(&DriftModel::constant(0.15), 1.0, 20, 100, 54);
    assert!(small_mu_case(&scn, &outside.fm, &DualOptions::default()).is_err());
}

#[test]
fn ambiguity_lowers_utility() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 40, 5000, 55);
    let state = RegressionState::for_market(&sim.fm);
    let xi: Vec<f64> = terminal_innovation(&sim.fm).iter().map(|w| -(-w).exp()).collect();
    let mut last = f64::INFINITY;
    for k in [0.0, 0.05, 0.1, 0.2] {
        let y0 = solve_bsde(&GeneratorSpec::k_ignorance(k).unwrap(), &xi, &sim.fm, &state, &BsdeConfig::default())
            .unwrap()
            .y0
            .value;
        assert!(y0 < last, "K = {k}: {y0} not below {last}");
        last = y0;
    }
}

#[test]
fn tilted_expectation_of_the_innovation() {
    let g = 0.2;
    let sim = simulate(&DriftModel::constant(0.0), 1.0, 50, 20_000, 56);
    let c = ControlProcess::constant(50, 20_000, 0.0, &[g], 0.5).unwrap();
    let e = expectation_under(&terminal_innovation(&sim.fm), &c, &sim.fm).unwrap();
    assert!(within(e.value, g, e.stderr, 4.0, 0.0), "{}", e.value);
    let flat = expectation_under(&vec![3.0; 20_000], &c, &sim.fm).unwrap();
    assert!(flat.exact && flat.value == 3.0);
}

#[test]
fn gauss_hermite_moments() {
    let (x, w) = gauss_hermite_normal(20);
    let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
    assert!((m(0) - 1.0).abs() < 1e-12);
    assert!(m(1).abs() < 1e-12);
    assert!((m(2) - 1.0).abs() < 1e-12);
    assert!((m(4) - 3.0).abs() < 1e-11);
    assert!((m(6) - 15.0).abs() < 1e-10);
}

#[test]
fn worst_case_prior_is_bang_bang() {
    let sim = simulate(&DriftModel::constant_gaussian(0.2, 0.04), 1.0, 50, 10_000, 57);
    let util = UtilitySpec::cara(1.0).unwrap();
    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let sol = solve_dual(1.0, &sim.fm, &util, &gen, &DualOptions::default()).unwrap();
    let rep = kignorance_utility(&sol.xi_hat, 0.1, &sim.fm, &util, &BsdeConfig::default()).unwrap();
    assert!(rep.consistent, "{rep:?}");
}
