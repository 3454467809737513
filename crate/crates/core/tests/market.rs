mod common;

use common::{simulate, terminal_price, within};
use recutil::{simulate_brownian, DriftModel, Estimate, TimeGrid};

#[test]
fn brownian_increments_have_the_right_moments() {
    let grid = TimeGrid::new(2.0, 40).unwrap();
    let ens = simulate_brownian(&grid, 20_000, 2, 11).unwrap();
    let dt = grid.dt();
    for j in 0..2 {
        let first: Vec<f64> = (0..ens.n_paths()).map(|p| ens.increments().get(0, p, j)).collect();
        let e = Estimate::from_samples(&first);
        assert!(within(e.value, 0.0, e.stderr, 5.0, 0.0), "mean {}", e.value);
        let sq: Vec<f64> = first.iter().map(|v| v * v).collect();
        let v = Estimate::from_samples(&sq);
        assert!(within(v.value, dt, v.stderr, 5.0, 0.0), "variance {} vs {dt}", v.value);

        let qv = Estimate::from_samples(&ens.quadratic_variation(j));
        assert!(within(qv.value, 2.0, qv.stderr, 5.0, 0.0), "quadratic variation {}", qv.value);
    }
}

#[test]
fn paths_do_not_depend_on_the_batch_size() {
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let small = simulate_brownian(&grid, 50, 1, 3).unwrap();
    let large = simulate_brownian(&grid, 500, 1, 3).unwrap();
    for k in 0..16 {
        assert_eq!(small.increments().slice(k), &large.increments().slice(k)[..50]);
    }
    let other = simulate_brownian(&grid, 50, 1, 4).unwrap();
    assert_ne!(small.increments().slice(0), other.increments().slice(0));
}

#[test]
fn coarse_grids_share_random_numbers() {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let fine = simulate_brownian(&grid, 200, 1, 5).unwrap();
    let coarse = fine.coarsen(8).unwrap();
    assert_eq!(coarse.grid().n_steps(), 8);
    for p in 0..200 {
        let a: f64 = (0..64).map(|k| fine.increments().get(k, p, 0)).sum();
        let b: f64 = (0..8).map(|k| coarse.increments().get(k, p, 0)).sum();
        assert!((a - b).abs() < 1e-12);
    }
    assert!(fine.coarsen(7).is_err());
}

#[test]
fn geometric_brownian_motion_mean() {
    let mu = 0.15;
    let sim = simulate(&DriftModel::constant(mu), 0.3, 50, 40_000, 17);
    let e = Estimate::from_samples(&terminal_price(&sim));
    assert!(within(e.value, mu.exp(), e.stderr, 5.0, 0.0), "E[S(T)] = {} vs {}", e.value, mu.exp());
}

#[test]
fn log_prices_are_exact_in_the_increments() {
    let (mu, sigma) = (0.2, 0.5);
    let sim = simulate(&DriftModel::constant(mu), sigma, 20, 10, 2);
    let grid = sim.market.grid();
    for p in 0..10 {
        let w: f64 = (0..20).map(|k| sim.fm.w_hat.get(k, p, 0)).sum();
        let expected = (mu - 0.5 * sigma * sigma) * grid.horizon() + sigma * w;
        assert!((sim.market.price(20, p, 0).ln() - expected).abs() < 1e-12);
    }
}

#[test]
fn mean_reverting_drift_moments() {
    let (rate, long_run, vol, m0, v0) = (2.0, 0.1, 0.3, -0.2, 0.01);
    let sim = simulate(&DriftModel::ornstein_uhlenbeck(rate, long_run, vol, m0, v0), 1.0, 400, 20_000, 23);
    let end: Vec<f64> = sim.drift.component(400, 0);
    let decay = (-rate * 1.0f64).exp();
    let mean = long_run + (m0 - long_run) * decay;
    let var = v0 * decay * decay + vol * vol * (1.0 - decay * decay) / (2.0 * rate);
    let e = Estimate::from_samples(&end);
    assert!(within(e.value, mean, e.stderr, 5.0, 1e-3), "mean {} vs {mean}", e.value);
    let sq: Vec<f64> = end.iter().map(|v| (v - mean).powi(2)).collect();
    let s = Estimate::from_samples(&sq);
    assert!(within(s.value, var, s.stderr, 5.0, 0.02 * var), "variance {} vs {var}", s.value);
}

#[test]
fn truncation_bounds_the_drift() {
    let model = DriftModel::constant_gaussian(0.0, 1.0).with_bound(0.5);
    let sim = simulate(&model, 1.0, 4, 2000, 8);
    assert!(sim.drift.max_abs() <= 0.5);
    assert!(sim.drift.iter().any(|v| v.abs() == 0.5));
}

#[test]
fn invalid_grids_and_batches_are_rejected() {
    assert!(TimeGrid::<f64>::new(1.0, 0).is_err());
    assert!(TimeGrid::<f64>::new(-1.0, 10).is_err());
    let grid = TimeGrid::new(1.0, 4).unwrap();
    assert!(simulate_brownian(&grid, 0, 1, 0).is_err());
}
