mod common;

use common::simulate;
use recutil::maxprin::{adjoint_processes, stationarity_check, StationarityStatus};
use recutil::{
    solve_bsde, solve_dual, BsdeConfig, DriftModel, DualOptions, Error, FilteredMarket, GeneratorSpec,
    RegressionState, UtilitySpec,
};

fn optimal(fm: &FilteredMarket<f64>, r: f64, util: &UtilitySpec<f64>) -> (Vec<f64>, recutil::BsdeSolution<f64>) {
    let gen = GeneratorSpec::discount(r, 1);
    let mut sol = solve_dual(1.0, fm, util, &gen, &DualOptions::default()).unwrap();
    let bsde = sol.value_bsde.take().expect("value BSDE is kept for smooth drivers");
    (sol.xi_hat, bsde)
}

#[test]
fn adjoints_of_a_discounting_driver() {
    let r = 0.05;
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 50, 2000, 61);
    let (_, bsde) = optimal(&sim.fm, r, &UtilitySpec::log());
    let adj = adjoint_processes(&GeneratorSpec::discount(r, 1), &bsde, &sim.fm).unwrap();
    for k in [0, 10, 50] {
        let t = sim.fm.grid.time(k);
        for p in 0..2000 {
            assert!((adj.log_n.get(k, p, 0) + r * t).abs() < 1e-12);
            assert!((adj.log_m.get(k, p, 0) - sim.fm.log_l_hat.get(k, p, 0)).abs() < 1e-12);
        }
    }
}

#[test]
fn optimal_wealth_is_stationary() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 50, 5000, 62);
    let util = UtilitySpec::log();
    let (xi, bsde) = optimal(&sim.fm, 0.05, &util);
    let mut adj = adjoint_processes(&GeneratorSpec::discount(0.05, 1), &bsde, &sim.fm).unwrap();
    let rep = stationarity_check(&xi, &adj, &util, 1e-6, 1e-2, 1e-3).unwrap();
    assert_eq!(rep.status, StationarityStatus::Pass, "{rep:?}");
    assert_eq!(rep.interior, 5000);

    adj.scale_n(3.0).unwrap();
    let scaled = stationarity_check(&xi, &adj, &util, 1e-6, 1e-2, 1e-3).unwrap();
    assert!((scaled.cv - rep.cv).abs() < 1e-12);
    assert!(adj.scale_n(-1.0).is_err());
}

#[test]
fn log_investor_without_driver_has_constant_ratio() {
    // ξ* = x/L̂(T) and m(T) = L̂(T), so m(T)ξ* ≡ x
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 50, 5000, 65);
    let util = UtilitySpec::log();
    let gen = GeneratorSpec::zero();
    let mut sol = solve_dual(2.0, &sim.fm, &util, &gen, &DualOptions::default()).unwrap();
    let bsde = sol.value_bsde.take().expect("value BSDE is kept for smooth drivers");
    let adj = adjoint_processes(&gen, &bsde, &sim.fm).unwrap();
    assert!(adj.log_n.iter().all(|v| *v == 0.0));
    let rep = stationarity_check(&sol.xi_hat, &adj, &util, 1e-6, 1e-2, 1e-3).unwrap();
    assert_eq!(rep.status, StationarityStatus::Pass, "{rep:?}");
    assert!(rep.cv < 1e-12, "{rep:?}");
}

#[test]
fn riskless_wealth_is_not_stationary() {
    let sim = simulate(&DriftModel::constant_gaussian(0.2, 0.04), 1.0, 50, 5000, 63);
    let util = UtilitySpec::cara(1.0).unwrap();
    let gen = GeneratorSpec::discount(0.05, 1);
    let xi = vec![1.0; 5000];
    let terminal: Vec<f64> = xi.iter().map(|v| util.u(*v)).collect();
    let state = RegressionState::for_market(&sim.fm);
    let bsde = solve_bsde(&gen, &terminal, &sim.fm, &state, &BsdeConfig::default()).unwrap();
    let adj = adjoint_processes(&gen, &bsde, &sim.fm).unwrap();
    let rep = stationarity_check(&xi, &adj, &util, 1e-6, 1e-2, 1e-3).unwrap();
    assert_eq!(rep.status, StationarityStatus::Fail, "{rep:?}");
    assert!(rep.cv > 0.1);
}

#[test]
fn kinked_drivers_have_no_adjoint() {
    let sim = simulate(&DriftModel::constant(0.2), 1.0, 10, 100, 64);
    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let state = RegressionState::for_market(&sim.fm);
    let bsde = solve_bsde(&gen, &vec![1.0; 100], &sim.fm, &state, &BsdeConfig::default()).unwrap();
    assert!(matches!(adjoint_processes(&gen, &bsde, &sim.fm), Err(Error::NotApplicable(_))));
}
