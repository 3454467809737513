//! Recursive utility maximization with an unobserved drift.
//!
//! The crate simulates a diffusion market whose drift is hidden, filters the
//! drift from prices, solves backward SDEs by least-squares Monte Carlo and
//! computes the dual (multiplier, worst-case prior) characterization of the
//! optimal terminal wealth.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `F64`
//! aliases below are the ones used by the command-line tool.

pub mod bsde;
pub mod dual;
pub mod error;
pub mod field;
pub mod kignorance;
pub mod filter;
pub mod generator;
pub mod linalg;
pub mod market;
pub mod maxprin;
pub mod regression;
pub mod scalar;
pub mod stats;

pub use bsde::{comparison_check, solve_bsde, solve_linear_bsde, BsdeConfig, BsdeDiagnostics, BsdeSolution, ComparisonReport, LinearBsdeSolution};
pub use dual::{
    dual_value, fenchel_transform, minimize_dual, optimal_terminal_wealth, solve_dual, solve_multiplier, verify_saddle,
    ControlProcess, Domain, DualOptions, DualSolution, ExtReal, MinimizerMethod, SaddleReport, UtilitySpec,
};
pub use error::{Error, Result};
pub use field::PathField;
pub use filter::{
    filter_drift, girsanov_kernel, innovation, innovation_from_observations, log_state_price_density,
    risk_premium, state_price_density, DriftEstimate, FilterKind, FilteredMarket, GirsanovKernel, ShiftState,
};
pub use generator::{DriverKind, GeneratorSpec};
pub use market::{
    build_time_grid, simulate_brownian, simulate_drift, simulate_market, DeterministicDrift, DriftKind,
    DriftModel, MarketPaths, PathEnsemble, SeedStreams, TimeGrid, Volatility,
};
pub use regression::{Basis, RegressionState, StepFit};
pub use scalar::Scalar;
pub use stats::{skew_kurtosis, Estimate};

pub type TimeGridF64 = TimeGrid<f64>;
pub type PathEnsembleF64 = PathEnsemble<f64>;
pub type DriftModelF64 = DriftModel<f64>;
pub type VolatilityF64 = Volatility<f64>;
pub type MarketPathsF64 = MarketPaths<f64>;
pub type FilteredMarketF64 = FilteredMarket<f64>;
pub type GeneratorSpecF64 = GeneratorSpec<f64>;
pub type BsdeSolutionF64 = BsdeSolution<f64>;
pub type DualSolutionF64 = DualSolution<f64>;
pub type UtilitySpecF64 = UtilitySpec<f64>;
pub type ControlProcessF64 = ControlProcess<f64>;
pub type EstimateF64 = Estimate<f64>;
pub type FilteredMarketF32 = FilteredMarket<f32>;
