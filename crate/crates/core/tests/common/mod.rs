#![allow(dead_code)]

use recutil::{
    simulate_brownian, simulate_drift, simulate_market, DriftModel, FilteredMarket, MarketPaths, PathField,
    SeedStreams, TimeGrid, Volatility,
};

pub struct Sim {
    pub market: MarketPaths<f64>,
    pub drift: PathField<f64>,
    pub fm: FilteredMarket<f64>,
}

/// One-asset market with volatility `sigma`, filtered under `model`.
pub fn simulate(model: &DriftModel<f64>, sigma: f64, n_steps: usize, n_paths: usize, seed: u64) -> Sim {
    let grid = TimeGrid::new(1.0, n_steps).unwrap();
    let seeds = SeedStreams::from_master(seed);
    let ens = simulate_brownian(&grid, n_paths, 1, seeds.brownian).unwrap();
    let drift = simulate_drift(model, &ens, seeds.drift).unwrap();
    let market = simulate_market(ens, drift.clone(), Volatility::scalar(1, sigma).unwrap(), vec![1.0]).unwrap();
    let fm = FilteredMarket::from_market(model, &market).unwrap();
    Sim { market, drift, fm }
}

pub fn terminal_price(sim: &Sim) -> Vec<f64> {
    let n = sim.fm.n_steps();
    (0..sim.fm.n_paths()).map(|p| sim.market.price(n, p, 0)).collect()
}

/// `Ŵ(T)` per path.
pub fn terminal_innovation(fm: &FilteredMarket<f64>) -> Vec<f64> {
    (0..fm.n_paths())
        .map(|p| (0..fm.n_steps()).map(|k| fm.w_hat.get(k, p, 0)).sum())
        .collect()
}

pub fn within(value: f64, target: f64, stderr: f64, sigmas: f64, slack: f64) -> bool {
    (value - target).abs() <= sigmas * stderr + slack
}
