mod common;

use common::{simulate, terminal_innovation, terminal_price, within};
use recutil::{
    comparison_check, solve_bsde, solve_linear_bsde, BsdeConfig, ControlProcess, DriftModel, GeneratorSpec,
    PathField, RegressionState,
};

fn cfg() -> BsdeConfig<f64> {
    BsdeConfig::default()
}

#[test]
fn zero_driver_is_the_sample_mean() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 20, 5000, 1);
    let xi = terminal_price(&sim);
    let state = RegressionState::for_market(&sim.fm);
    let sol = solve_bsde(&GeneratorSpec::zero(), &xi, &sim.fm, &state, &cfg()).unwrap();
    let mean = xi.iter().sum::<f64>() / xi.len() as f64;
    assert!((sol.y0.value - mean).abs() < 1e-12 * mean.abs().max(1.0));
}

#[test]
fn discounting_a_stock() {
    let (mu, r) = (0.1, 0.05);
    let sim = simulate(&DriftModel::constant(mu), 0.3, 100, 20_000, 2);
    let xi = terminal_price(&sim);
    let state = RegressionState::for_market(&sim.fm);
    let sol = solve_bsde(&GeneratorSpec::discount(r, 1), &xi, &sim.fm, &state, &cfg()).unwrap();
    let exact = ((mu - r) * 1.0f64).exp();
    assert!(within(sol.y0.value, exact, sol.y0.stderr, 4.0, 1e-3), "{} vs {exact}", sol.y0.value);
}

#[test]
fn z_coefficient_tilts_the_innovation() {
    // f = g z with ξ = Ŵ(T): Y(0) = E[e^{gŴ(T) − g²T/2} Ŵ(T)] = gT
    let g = 0.3;
    let sim = simulate(&DriftModel::constant(0.0), 1.0, 50, 20_000, 3);
    let xi = terminal_innovation(&sim.fm);
    let state = RegressionState::for_market(&sim.fm);
    let sol = solve_bsde(&GeneratorSpec::linear(0.0, vec![g]), &xi, &sim.fm, &state, &cfg()).unwrap();
    assert!(within(sol.y0.value, g, sol.y0.stderr, 4.0, 1e-3), "{}", sol.y0.value);
    for k in [0, 25, 49] {
        let z = sol.z.component(k, 0);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "Z at step {k}: {mean}");
    }
}

#[test]
fn ambiguity_penalizes_unit_exposure() {
    // ξ = Ŵ(T) has Z ≡ 1, so under f = −K|z| Y(t) = Ŵ(t) − K(T − t).
    let k = 0.2;
    let sim = simulate(&DriftModel::constant(0.0), 1.0, 50, 20_000, 4);
    let xi = terminal_innovation(&sim.fm);
    let state = RegressionState::for_market(&sim.fm);
    let sol = solve_bsde(&GeneratorSpec::k_ignorance(k).unwrap(), &xi, &sim.fm, &state, &cfg()).unwrap();
    assert!(within(sol.y0.value, -k, sol.y0.stderr, 4.0, 2e-3), "{}", sol.y0.value);
}

#[test]
fn regression_solver_agrees_with_the_linear_solution() {
    let (beta, gamma) = (-0.1, 0.25);
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 100, 20_000, 5);
    let xi: Vec<f64> = terminal_price(&sim).iter().map(|s| s.ln()).collect();
    let state = RegressionState::for_market(&sim.fm);
    let gen = GeneratorSpec::linear(beta, vec![gamma]);
    let sol = solve_bsde(&gen, &xi, &sim.fm, &state, &cfg()).unwrap();
    let c = ControlProcess::constant(100, 20_000, beta, &[gamma], gen.lipschitz).unwrap();
    let lin = solve_linear_bsde(&c.beta, &c.gamma, &PathField::zeros(100, 20_000, 1), &xi, &sim.fm, &state, &cfg())
        .unwrap();
    let se = sol.y0.combined_stderr(&lin.y0);
    assert!(within(sol.y0.value, lin.y0.value, se, 4.0, 1e-3), "{} vs {}", sol.y0.value, lin.y0.value);
}

#[test]
fn linear_solution_integrates_the_source() {
    // F ≡ 1 with zero terminal value: Y(0) = (1 − e^{−rT})/r
    let r = 0.5;
    let sim = simulate(&DriftModel::constant(0.0), 1.0, 400, 100, 6);
    let c = ControlProcess::constant(400, 100, -r, &[0.0], r).unwrap();
    let state = RegressionState::for_market(&sim.fm);
    let ones = PathField::filled(400, 100, 1, 1.0);
    let lin = solve_linear_bsde(&c.beta, &c.gamma, &ones, &vec![0.0; 100], &sim.fm, &state, &cfg()).unwrap();
    let exact = (1.0 - (-r * 1.0f64).exp()) / r;
    assert!((lin.y0.value - exact).abs() < 2e-3, "{} vs {exact}", lin.y0.value);
}

#[test]
fn comparison_holds_for_ordered_terminals() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 40, 5000, 7);
    let state = RegressionState::for_market(&sim.fm);
    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let low: Vec<f64> = terminal_price(&sim).iter().map(|s| s.ln()).collect();
    let high: Vec<f64> = low.iter().map(|v| v + 0.05 + 0.1 * v.abs()).collect();
    let a = solve_bsde(&gen, &low, &sim.fm, &state, &cfg()).unwrap();
    let b = solve_bsde(&gen, &high, &sim.fm, &state, &cfg()).unwrap();
    let rep = comparison_check(&a, &b, 1e-3, 1e-3).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(a.y0.value < b.y0.value);
}

#[test]
fn shifted_terminal_shifts_the_solution() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 40, 5000, 9);
    let state = RegressionState::for_market(&sim.fm);
    let low: Vec<f64> = terminal_price(&sim).iter().map(|s| s.ln()).collect();
    let high: Vec<f64> = low.iter().map(|v| v + 1.0).collect();
    let a = solve_bsde(&GeneratorSpec::zero(), &low, &sim.fm, &state, &cfg()).unwrap();
    let b = solve_bsde(&GeneratorSpec::zero(), &high, &sim.fm, &state, &cfg()).unwrap();
    for (ya, yb) in a.y.iter().zip(b.y.iter()) {
        assert!((yb - ya - 1.0).abs() < 1e-9, "{ya} {yb}");
    }
    assert_eq!(a.y.slice(40), low.as_slice());

    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let lifted: Vec<f64> = low.iter().map(|v| v + v.abs()).collect();
    let c = solve_bsde(&gen, &low, &sim.fm, &state, &cfg()).unwrap();
    let d = solve_bsde(&gen, &lifted, &sim.fm, &state, &cfg()).unwrap();
    let rep = comparison_check(&c, &d, 1e-3, 1e-3).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn unit_source_integrates_to_the_horizon() {
    let sim = simulate(&DriftModel::constant(0.1), 1.0, 50, 200, 10);
    let c = ControlProcess::constant(50, 200, 0.0, &[0.0], 0.0).unwrap();
    let state = RegressionState::for_market(&sim.fm);
    let ones = PathField::filled(50, 200, 1, 1.0);
    let lin = solve_linear_bsde(&c.beta, &c.gamma, &ones, &vec![0.0; 200], &sim.fm, &state, &cfg()).unwrap();
    assert!((lin.y0.value - 1.0).abs() < 1e-12, "{}", lin.y0.value);
}

#[test]
fn malformed_inputs_are_errors() {
    let sim = simulate(&DriftModel::constant(0.1), 1.0, 10, 100, 8);
    let state = RegressionState::for_market(&sim.fm);
    assert!(solve_bsde(&GeneratorSpec::zero(), &[1.0; 99], &sim.fm, &state, &cfg()).is_err());
    let mut bad = vec![1.0; 100];
    bad[3] = f64::NAN;
    assert!(solve_bsde(&GeneratorSpec::zero(), &bad, &sim.fm, &state, &cfg()).is_err());
}
