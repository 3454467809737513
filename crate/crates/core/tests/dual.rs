mod common;

use common::{simulate, within};
use recutil::dual::{dual_value_samples, duality_relation_check, fenchel_transform, ExtReal, FenchelOptions};
use recutil::{
    dual_value, solve_dual, verify_saddle, ControlProcess, DriftModel, DualOptions, Estimate, GeneratorSpec,
    UtilitySpec,
};

#[test]
fn transform_of_the_ambiguity_driver_is_an_indicator() {
    let gen = GeneratorSpec::k_ignorance(0.2).unwrap();
    for g in [-0.2, -0.05, 0.0, 0.2] {
        assert_eq!(fenchel_transform(&gen, 0.0, 0.0, &[g], &[0.0]).unwrap(), ExtReal::Finite(0.0));
    }
    assert_eq!(fenchel_transform(&gen, 0.0, 0.0, &[0.21], &[0.0]).unwrap(), ExtReal::PosInfinity);
    assert_eq!(fenchel_transform(&gen, 0.0, 0.1, &[0.0], &[0.0]).unwrap(), ExtReal::PosInfinity);

    let lin = GeneratorSpec::linear(-0.05, vec![0.1]);
    assert_eq!(fenchel_transform(&lin, 0.0, -0.05, &[0.1], &[0.0]).unwrap(), ExtReal::Finite(0.0));
    assert!(!fenchel_transform(&lin, 0.0, 0.0, &[0.1], &[0.0]).unwrap().is_finite());
}

#[test]
fn numerical_transform_of_a_quadratic_driver() {
    // f = −z²/2 − y²/2 has F(β, γ) = (β² + γ²)/2
    let gen = GeneratorSpec::custom("quadratic", 10.0, true, |_, y: f64, z: &[f64], _| -0.5 * (y * y + z[0] * z[0]), None)
        .unwrap();
    for (b, g) in [(0.0, 0.0), (0.3, -0.4), (-1.0, 2.0)] {
        let f = fenchel_transform(&gen, 0.0, b, &[g], &[0.0]).unwrap().finite().unwrap();
        assert!((f - 0.5 * (b * b + g * g)).abs() < 1e-6, "F({b}, {g}) = {f}");
    }
    let linear_growth = GeneratorSpec::custom("abs", 1.0, true, |_, _, z: &[f64], _| -z[0].abs(), None).unwrap();
    assert!(!fenchel_transform(&linear_growth, 0.0, 0.0, &[1.5], &[0.0]).unwrap().is_finite());
}

#[test]
fn convex_transform_rejects_convex_drivers() {
    let gen = GeneratorSpec::custom("convex", 1.0, false, |_, _, z: &[f64], _| z[0].abs(), None).unwrap();
    assert!(fenchel_transform(&gen, 0.0, 0.0, &[0.0], &[0.0]).is_err());
}

#[test]
fn driver_is_recovered_from_its_transform() {
    let gen = GeneratorSpec::k_ignorance(0.3).unwrap();
    let rep = duality_relation_check(&gen, 200, 401, 9).unwrap();
    assert!(rep.max_gap <= 1e-12, "{rep:?}");
    let coarse = duality_relation_check(&gen, 200, 65, 10).unwrap();
    assert!(coarse.max_gap <= 0.3 * (0.6 / 64.0), "{coarse:?}");
}

#[test]
fn utility_conjugates_match_brute_force() {
    let utils = [UtilitySpec::cara(2.0).unwrap(), UtilitySpec::log(), UtilitySpec::power(0.5).unwrap()];
    for u in &utils {
        for zeta in [0.3, 1.0, 2.5] {
            let brute = (1..200_000)
                .map(|i| i as f64 * 1e-4 - if u.label().starts_with("cara") { 10.0 } else { 0.0 })
                .filter(|x| u.u(*x).is_finite())
                .map(|x| u.u(x) - x * zeta)
                .fold(f64::NEG_INFINITY, f64::max);
            let exact = u.conjugate(zeta);
            assert!((exact - brute).abs() < 1e-6, "{} at {zeta}: {exact} vs {brute}", u.label());
        }
    }
}

#[test]
fn merton_logarithmic_investor() {
    let (mu, sigma, x) = (0.12, 0.4, 2.0);
    let sim = simulate(&DriftModel::constant(mu), sigma, 100, 20_000, 21);
    let util = UtilitySpec::log();
    let sol = solve_dual(x, &sim.fm, &util, &GeneratorSpec::zero(), &DualOptions::default()).unwrap();
    let eta = mu / sigma;
    assert!((sol.zeta_hat - 1.0 / x).abs() < 1e-12);
    let exact = x.ln() + 0.5 * eta * eta;
    assert!(within(sol.v_lower.value, exact, sol.v_lower.stderr, 4.0, 1e-3), "{} vs {exact}", sol.v_lower.value);
    assert!(within(sol.budget.value, x, sol.budget.stderr, 4.0, 1e-12));
}

#[test]
fn merton_exponential_investor() {
    let (mu, alpha, x) = (0.2, 1.5, 1.0);
    let sim = simulate(&DriftModel::constant(mu), 1.0, 100, 20_000, 22);
    let util = UtilitySpec::cara(alpha).unwrap();
    let sol = solve_dual(x, &sim.fm, &util, &GeneratorSpec::zero(), &DualOptions::default()).unwrap();
    let zeta = alpha * (-alpha * x - 0.5 * mu * mu).exp();
    assert!(within(sol.zeta_hat, zeta, sol.zeta_stderr, 4.0, 1e-3 * zeta), "{} vs {zeta}", sol.zeta_hat);
    let exact = 1.0 - zeta / alpha;
    assert!(within(sol.v_lower.value, exact, sol.v_lower.stderr, 4.0, 1e-3), "{} vs {exact}", sol.v_lower.value);
    let gap = (sol.v_star.value - sol.v_lower.value).abs();
    assert!(gap <= 4.0 * sol.v_star.combined_stderr(&sol.v_lower) + 1e-12);
}

#[test]
fn dual_value_is_convex_in_the_multiplier() {
    let sim = simulate(&DriftModel::constant_gaussian(0.1, 0.04), 1.0, 40, 2000, 23);
    let util = UtilitySpec::cara(1.0).unwrap();
    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let c = ControlProcess::constant(40, 2000, 0.0, &[0.05], 0.1).unwrap();
    let v = |z: f64| dual_value(z, &c, &sim.fm, &util, &gen).unwrap().value;
    for (a, b) in [(0.1, 0.9), (0.3, 2.0), (1.0, 1.2)] {
        assert!(v(0.5 * (a + b)) <= 0.5 * (v(a) + v(b)) + 1e-12);
    }
    let outside = ControlProcess::constant(40, 2000, 0.0, &[0.0], 0.1).unwrap();
    let lin = GeneratorSpec::linear(0.0, vec![0.05]);
    assert!(dual_value(0.5, &outside, &sim.fm, &util, &lin).unwrap().value.is_infinite());
}

#[test]
fn exponential_dual_value_expansion() {
    // 1 − ζ/α + (ζ/α)ln(ζ/α) + (ζ/2α)∫(μ + γ)² dt for a known drift, σ = 1
    let (mu, k, alpha, zeta): (f64, f64, f64, f64) = (0.2, 0.1, 1.0, 0.5);
    let sim = simulate(&DriftModel::constant(mu), 1.0, 50, 40_000, 26);
    let util = UtilitySpec::cara(alpha).unwrap();
    let gen = GeneratorSpec::k_ignorance(k).unwrap();
    let expansion = |g: f64| {
        let r = zeta / alpha;
        1.0 - r + r * r.ln() + 0.5 * r * (mu + g) * (mu + g)
    };
    let mut samples = Vec::new();
    for g in [0.0, k, -k] {
        let c = ControlProcess::constant(50, 40_000, 0.0, &[g], k).unwrap();
        let s = dual_value_samples(zeta, &c, &sim.fm, &util, &gen, &FenchelOptions::default()).unwrap().unwrap();
        let v = Estimate::from_samples(&s);
        assert!(within(v.value, expansion(g), v.stderr, 4.0, 1e-12), "gamma {g}: {} vs {}", v.value, expansion(g));
        samples.push(s);
    }
    // worst direction against the minimizing one, on common paths
    let diff: Vec<f64> = samples[1].iter().zip(&samples[2]).map(|(a, b)| a - b).collect();
    let excess = Estimate::from_samples(&diff);
    let expected = zeta / (2.0 * alpha) * ((mu + k).powi(2) - (mu - k).powi(2));
    assert!(excess.value > 0.0);
    assert!(within(excess.value, expected, excess.stderr, 4.0, 1e-12), "{} vs {expected}", excess.value);
}

#[test]
fn logarithmic_dual_value_without_exposure() {
    // γ = −μ̂ cancels the density, leaving −ln ζ − 1 on every path
    let (mu, k) = (0.05, 0.1);
    let sim = simulate(&DriftModel::constant(mu), 1.0, 50, 5000, 27);
    let gen = GeneratorSpec::k_ignorance(k).unwrap();
    let c = ControlProcess::constant(50, 5000, 0.0, &[-mu], k).unwrap();
    for zeta in [0.4f64, 1.0, 2.5] {
        let v = dual_value(zeta, &c, &sim.fm, &UtilitySpec::log(), &gen).unwrap();
        let exact = -zeta.ln() - 1.0;
        assert!(within(v.value, exact, v.stderr, 4.0, 1e-12), "zeta {zeta}: {} vs {exact}", v.value);
    }
}

#[test]
fn saddle_point_survives_alternatives() {
    let sim = simulate(&DriftModel::constant_gaussian(0.15, 0.04), 1.0, 50, 10_000, 24);
    let util = UtilitySpec::cara(1.0).unwrap();
    let gen = GeneratorSpec::k_ignorance(0.1).unwrap();
    let opts = DualOptions::default();
    let sol = solve_dual(1.0, &sim.fm, &util, &gen, &opts).unwrap();
    let rep = verify_saddle(&sol, &sim.fm, &util, &gen, 8, 99, &opts).unwrap();
    assert_eq!(rep.control_violations, 0, "{:?}", rep.control_checks);
    assert_eq!(rep.terminal_violations, 0, "{:?}", rep.terminal_checks);
    assert_eq!(rep.terminal_checks.len(), 8);
}

#[test]
fn wealth_outside_the_domain_is_rejected() {
    let sim = simulate(&DriftModel::constant(0.1), 1.0, 10, 100, 25);
    let opts = DualOptions::default();
    assert!(solve_dual(-1.0, &sim.fm, &UtilitySpec::log(), &GeneratorSpec::zero(), &opts).is_err());
    assert!(UtilitySpec::cara(0.0).is_err());
    assert!(UtilitySpec::power(1.0).is_err());
}
