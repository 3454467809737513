use proptest::prelude::*;
use recutil::generator::{log_auxiliary_argmin, log_auxiliary_value};
use recutil::{Basis, Estimate, GeneratorSpec, StepFit, UtilitySpec};

fn utilities() -> impl Strategy<Value = UtilitySpec<f64>> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|a| UtilitySpec::cara(a).unwrap()),
        Just(UtilitySpec::log()),
        (-2.0f64..0.9)
            .prop_filter("nonzero exponent", |p| p.abs() > 0.05)
            .prop_map(|p| UtilitySpec::power(p).unwrap()),
    ]
}

proptest! {
    #[test]
    fn inverse_marginal_inverts(u in utilities(), x in 0.05f64..20.0) {
        let back = u.inverse_marginal(u.u_prime(x));
        prop_assert!((back - x).abs() <= 1e-9 * x.max(1.0), "{} at {x}: {back}", u.label());
    }

    #[test]
    fn fenchel_young_inequality(u in utilities(), x in 0.05f64..20.0, zeta in 0.01f64..10.0) {
        let lhs = u.conjugate(zeta);
        prop_assert!(lhs >= u.u(x) - x * zeta - 1e-12 * lhs.abs().max(1.0));
        let attained = u.inverse_marginal(zeta);
        let eq = u.u(attained) - attained * zeta;
        prop_assert!((eq - lhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn ambiguity_driver_is_k_lipschitz(
        k in 0.0f64..2.0,
        z1 in prop::collection::vec(-5.0f64..5.0, 3),
        z2 in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let gen = GeneratorSpec::k_ignorance(k).unwrap();
        let dz = z1.iter().zip(&z2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let df = (gen.eval(0.0, 0.0, &z1, &[0.0; 3]) - gen.eval(0.0, 0.0, &z2, &[0.0; 3])).abs();
        prop_assert!(df <= k * dz + 1e-12);
        prop_assert!(gen.eval(0.0, 0.0, &z1, &[0.0; 3]) <= 0.0);
    }

    #[test]
    fn auxiliary_driver_is_a_box_infimum(k in 0.0f64..1.0, mu in -1.0f64..1.0, z in -4.0f64..4.0) {
        let brute = (0..=4000)
            .map(|i| -k + 2.0 * k * i as f64 / 4000.0)
            .map(|g| (mu + g).powi(2) + z * g)
            .fold(f64::INFINITY, f64::min);
        let v = log_auxiliary_value(k, mu, z);
        prop_assert!(v <= brute + 1e-12);
        prop_assert!(brute - v <= 1e-5);
        let g = log_auxiliary_argmin(k, mu, z);
        prop_assert!(g.abs() <= k + 1e-15);
        prop_assert!(((mu + g).powi(2) + z * g - v).abs() <= 1e-12);
    }

    #[test]
    fn regression_reproduces_quadratics(
        coef in prop::collection::vec(-3.0f64..3.0, 6),
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let target: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| coef[0] + coef[1] * a + coef[2] * b + coef[3] * a * a + coef[4] * a * b + coef[5] * b * b)
            .collect();
        let fit = StepFit::fit(&[x, y], n, Basis::default(), 1e-10, 0).unwrap();
        let fitted = fit.project(&target);
        for (a, b) in fitted.iter().zip(&target) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn combined_error_is_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let x = Estimate::sampled(0.0, a);
        let y = Estimate::sampled(1.0, b);
        prop_assert_eq!(x.combined_stderr(&y), y.combined_stderr(&x));
        prop_assert!((x.combined_stderr(&y) - (a * a + b * b).sqrt()).abs() < 1e-15);
    }
}
