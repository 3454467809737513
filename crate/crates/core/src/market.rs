//! Simulation of the driving Brownian motion, the unobserved appreciation
//! rate and the log-Euler stock dynamics on a uniform grid.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::PathField;
use crate::linalg::{invert, DroppingCholesky};
use crate::scalar::Scalar;

/// Fixed offset separating the drift noise stream from the Brownian stream.
pub const DRIFT_SEED_OFFSET: u64 = 0x5EED_0000_0000_0001;
/// Fixed offset for auxiliary streams (verification alternatives, re-simulation).
pub const AUX_SEED_OFFSET: u64 = 0x5EED_0000_0000_0002;

/// Seeds of the independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub brownian: u64,
    pub drift: u64,
    pub aux: u64,
}

impl SeedStreams {
    pub fn from_master(master: u64) -> Self {
        Self {
            brownian: master,
            drift: master.wrapping_add(DRIFT_SEED_OFFSET),
            aux: master.wrapping_add(AUX_SEED_OFFSET),
        }
    }
}

/// Per-path generator: path `p` always reads stream `p` of the seed, so
/// results do not depend on how paths are split across threads.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Uniform time axis `0 = t_0 < … < t_n = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<S> {
    horizon: S,
    n_steps: usize,
    times: Vec<S>,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(horizon: S, n_steps: usize) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if n_steps == 0 {
            return invalid("n_steps must be at least 1");
        }
        let n = S::from_usize_lossy(n_steps);
        let mut times: Vec<S> = (0..=n_steps)
            .map(|k| horizon * S::from_usize_lossy(k) / n)
            .collect();
        times[n_steps] = horizon;
        Ok(Self {
            horizon,
            n_steps,
            times,
        })
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.horizon
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dt(&self) -> S {
        self.horizon / S::from_usize_lossy(self.n_steps)
    }

    #[inline]
    pub fn time(&self, k: usize) -> S {
        self.times[k]
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    /// Grid with `n_steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return invalid(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps
            ));
        }
        Self::new(self.horizon, self.n_steps / factor)
    }
}

pub fn build_time_grid<S: Scalar>(horizon: S, n_steps: usize) -> Result<TimeGrid<S>> {
    TimeGrid::new(horizon, n_steps)
}

/// Brownian increments for a batch of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<S> {
    grid: TimeGrid<S>,
    seed: u64,
    dw: PathField<S>,
}

impl<S: Scalar> PathEnsemble<S> {
    /// Wraps externally produced increments (`n_steps` slices of
    /// `n_paths × dim`).
    pub fn from_increments(grid: TimeGrid<S>, seed: u64, dw: PathField<S>) -> Result<Self> {
        if dw.n_times() != grid.n_steps() {
            return invalid(format!(
                "increment field has {} steps, grid has {}",
                dw.n_times(),
                grid.n_steps()
            ));
        }
        if dw.n_paths() == 0 || dw.dim() == 0 {
            return invalid("ensemble needs at least one path and one dimension");
        }
        Ok(Self { grid, seed, dw })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }
    pub fn n_paths(&self) -> usize {
        self.dw.n_paths()
    }
    pub fn dim(&self) -> usize {
        self.dw.dim()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn increments(&self) -> &PathField<S> {
        &self.dw
    }
    pub fn into_increments(self) -> PathField<S> {
        self.dw
    }

    /// Same paths on a grid `factor` times coarser: increments are summed, so
    /// the coarse and fine ensembles share their random numbers.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let (np, d) = (self.n_paths(), self.dim());
        let mut dw = PathField::zeros(grid.n_steps(), np, d);
        for k in 0..grid.n_steps() {
            let out = dw.slice_mut(k);
            for sub in 0..factor {
                let fine = self.dw.slice(k * factor + sub);
                for (o, v) in out.iter_mut().zip(fine) {
                    *o += *v;
                }
            }
        }
        Ok(Self {
            grid,
            seed: self.seed,
            dw,
        })
    }

    /// Realized quadratic variation `Σ_k (ΔW_{k,j})²` of component `j` per path.
    pub fn quadratic_variation(&self, j: usize) -> Vec<S> {
        let mut qv = vec![S::zero(); self.n_paths()];
        for k in 0..self.grid.n_steps() {
            for (p, q) in qv.iter_mut().enumerate() {
                let v = self.dw.get(k, p, j);
                *q += v * v;
            }
        }
        qv
    }
}

/// Draws i.i.d. `N(0, Δt)` increments, one independent stream per path.
pub fn simulate_brownian<S: Scalar>(
    grid: &TimeGrid<S>,
    n_paths: usize,
    dim: usize,
    seed: u64,
) -> Result<PathEnsemble<S>> {
    if n_paths == 0 {
        return invalid("n_paths must be at least 1");
    }
    if dim == 0 {
        return invalid("dim must be at least 1");
    }
    let sqrt_dt = grid.dt().sqrt();
    let mut rngs: Vec<ChaCha8Rng> = (0..n_paths).map(|p| path_rng(seed, p)).collect();
    let mut dw = PathField::zeros(grid.n_steps(), n_paths, dim);
    for k in 0..grid.n_steps() {
        dw.slice_mut(k)
            .par_chunks_mut(dim)
            .zip(rngs.par_iter_mut())
            .for_each(|(out, rng)| {
                for v in out.iter_mut() {
                    *v = S::standard_normal(rng) * sqrt_dt;
                }
            });
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        seed,
        dw,
    })
}

/// Deterministic appreciation rate `μ_i(t)`.
#[derive(Clone)]
pub struct DeterministicDrift<S> {
    label: String,
    f: Arc<dyn Fn(S, usize) -> S + Send + Sync>,
}

impl<S: Scalar> DeterministicDrift<S> {
    pub fn constant(value: S) -> Self {
        Self {
            label: format!("constant({value})"),
            f: Arc::new(move |_, _| value),
        }
    }

    /// `μ_i(t) = f(t, i)`.
    pub fn from_fn(label: impl Into<String>, f: impl Fn(S, usize) -> S + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn value(&self, t: S, component: usize) -> S {
        (self.f)(t, component)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<S> fmt::Debug for DeterministicDrift<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeterministicDrift").field("label", &self.label).finish()
    }
}

/// Law of the unobserved drift. Components are independent and share the
/// parameters.
#[derive(Debug, Clone)]
pub enum DriftKind<S> {
    Deterministic(DeterministicDrift<S>),
    /// `μ ~ N(mean, variance)` drawn once per path, constant in time.
    ConstantGaussian { mean: S, variance: S },
    /// `dμ = rate (long_run − μ) dt + vol dB`, `μ(0) ~ N(mean, variance)`.
    OrnsteinUhlenbeck {
        rate: S,
        long_run: S,
        vol: S,
        mean: S,
        variance: S,
    },
}

#[derive(Debug, Clone)]
pub struct DriftModel<S> {
    pub kind: DriftKind<S>,
    /// Truncation level; `None` selects ten standard deviations.
    pub bound: Option<S>,
}

impl<S: Scalar> DriftModel<S> {
    pub fn deterministic(drift: DeterministicDrift<S>) -> Self {
        Self {
            kind: DriftKind::Deterministic(drift),
            bound: None,
        }
    }

    pub fn constant(value: S) -> Self {
        Self::deterministic(DeterministicDrift::constant(value))
    }

    pub fn constant_gaussian(mean: S, variance: S) -> Self {
        Self {
            kind: DriftKind::ConstantGaussian { mean, variance },
            bound: None,
        }
    }

    pub fn ornstein_uhlenbeck(rate: S, long_run: S, vol: S, mean: S, variance: S) -> Self {
        Self {
            kind: DriftKind::OrnsteinUhlenbeck {
                rate,
                long_run,
                vol,
                mean,
                variance,
            },
            bound: None,
        }
    }

    pub fn with_bound(mut self, bound: S) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, DriftKind::Deterministic(_))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bound {
            if !(b > S::zero()) {
                return invalid(format!("drift bound must be positive, got {b}"));
            }
        }
        match &self.kind {
            DriftKind::Deterministic(_) => Ok(()),
            DriftKind::ConstantGaussian { variance, .. } => {
                if *variance < S::zero() {
                    return invalid(format!("prior variance v0 must be >= 0, got {variance}"));
                }
                Ok(())
            }
            DriftKind::OrnsteinUhlenbeck {
                rate, vol, variance, ..
            } => {
                if *variance < S::zero() {
                    return invalid(format!("prior variance v0 must be >= 0, got {variance}"));
                }
                if *rate < S::zero() || *vol < S::zero() {
                    return invalid("mean-reversion rate and volatility must be >= 0");
                }
                Ok(())
            }
        }
    }

    /// Effective truncation level on `grid`: the configured bound, or ten
    /// standard deviations of the drift law.
    pub fn bound_for(&self, grid: &TimeGrid<S>, dim: usize) -> S {
        if let Some(b) = self.bound {
            return b;
        }
        let ten = S::lit(10.0);
        match &self.kind {
            DriftKind::Deterministic(f) => grid
                .times()
                .iter()
                .flat_map(|&t| (0..dim).map(move |i| (t, i)))
                .fold(S::zero(), |m, (t, i)| m.max(f.value(t, i).abs())),
            DriftKind::ConstantGaussian { mean, variance } => mean.abs() + ten * variance.sqrt(),
            DriftKind::OrnsteinUhlenbeck {
                rate,
                long_run,
                vol,
                mean,
                variance,
            } => {
                let spread = if *rate > S::zero() {
                    (*vol * *vol) / (S::lit(2.0) * *rate)
                } else {
                    *vol * *vol * grid.horizon()
                };
                mean.abs().max(long_run.abs()) + ten * variance.max(spread).sqrt()
            }
        }
    }
}

/// Drift paths `μ(t_k)` for `k = 0..=n` (`n_steps + 1` slices), truncated to
/// the model bound. Randomness comes from `drift_seed` only.
pub fn simulate_drift<S: Scalar>(
    model: &DriftModel<S>,
    ensemble: &PathEnsemble<S>,
    drift_seed: u64,
) -> Result<PathField<S>> {
    model.validate()?;
    let grid = ensemble.grid();
    let (np, d, n) = (ensemble.n_paths(), ensemble.dim(), grid.n_steps());
    let bound = model.bound_for(grid, d);
    let clamp = |v: S| v.max(-bound).min(bound);
    let mut mu = PathField::zeros(n + 1, np, d);
    match &model.kind {
        DriftKind::Deterministic(f) => {
            for k in 0..=n {
                let t = grid.time(k);
                let row: Vec<S> = (0..d).map(|i| clamp(f.value(t, i))).collect();
                for chunk in mu.slice_mut(k).chunks_mut(d) {
                    chunk.copy_from_slice(&row);
                }
            }
        }
        DriftKind::ConstantGaussian { mean, variance } => {
            let sd = variance.sqrt();
            let draws: Vec<S> = (0..np)
                .into_par_iter()
                .flat_map_iter(|p| {
                    let mut rng = path_rng(drift_seed, p);
                    (0..d)
                        .map(|_| clamp(*mean + sd * S::standard_normal(&mut rng)))
                        .collect::<Vec<_>>()
                })
                .collect();
            for k in 0..=n {
                mu.slice_mut(k).copy_from_slice(&draws);
            }
        }
        DriftKind::OrnsteinUhlenbeck {
            rate,
            long_run,
            vol,
            mean,
            variance,
        } => {
            let dt = grid.dt();
            let sqrt_dt = dt.sqrt();
            let sd0 = variance.sqrt();
            let mut rngs: Vec<ChaCha8Rng> = (0..np).map(|p| path_rng(drift_seed, p)).collect();
            for (chunk, rng) in mu.slice_mut(0).chunks_mut(d).zip(rngs.iter_mut()) {
                for v in chunk.iter_mut() {
                    *v = clamp(*mean + sd0 * S::standard_normal(rng));
                }
            }
            for k in 0..n {
                let prev = mu.slice(k).to_vec();
                let next = mu.slice_mut(k + 1);
                for (p, rng) in rngs.iter_mut().enumerate() {
                    for i in 0..d {
                        let m = prev[p * d + i];
                        let step = *rate * (*long_run - m) * dt
                            + *vol * sqrt_dt * S::standard_normal(rng);
                        next[p * d + i] = clamp(m + step);
                    }
                }
            }
        }
    }
    Ok(mu)
}

/// Constant `d×d` volatility matrix with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Volatility<S> {
    dim: usize,
    matrix: Vec<S>,
    inverse: Vec<S>,
    diagonal: bool,
}

/// Default ellipticity level `ε` in `ρ'σσ'ρ ≥ ε|ρ|²`.
pub const DEFAULT_ELLIPTICITY: f64 = 1e-8;

impl<S: Scalar> Volatility<S> {
    /// Validates invertibility and uniform ellipticity `σσ' − εI ≻ 0`.
    pub fn new(matrix: Vec<S>, dim: usize, epsilon: S) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim {
            return invalid(format!("sigma must be {dim}x{dim}"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("sigma has non-finite entries".into()));
        }
        let inverse = invert(&matrix, dim, S::lit(1e-12))
            .ok_or_else(|| Error::Model("sigma is singular".into()))?;
        let mut gram = vec![S::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = S::zero();
                for l in 0..dim {
                    acc += matrix[i * dim + l] * matrix[j * dim + l];
                }
                gram[i * dim + j] = acc - if i == j { epsilon } else { S::zero() };
            }
        }
        if DroppingCholesky::factor(&gram, dim, S::zero()).rank() != dim {
            return Err(Error::Model(format!(
                "sigma violates uniform ellipticity with epsilon = {epsilon}"
            )));
        }
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || matrix[i * dim + j] == S::zero()));
        Ok(Self {
            dim,
            matrix,
            inverse,
            diagonal,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, S::one()).expect("identity is elliptic")
    }

    pub fn scalar(dim: usize, s: S) -> Result<Self> {
        Self::diagonal(&vec![s; dim])
    }

    pub fn diagonal(entries: &[S]) -> Result<Self> {
        let d = entries.len();
        let mut m = vec![S::zero(); d * d];
        for (i, &e) in entries.iter().enumerate() {
            m[i * d + i] = e;
        }
        Self::new(m, d, S::lit(DEFAULT_ELLIPTICITY))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn matrix(&self) -> &[S] {
        &self.matrix
    }
    pub fn inverse(&self) -> &[S] {
        &self.inverse
    }
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn is_identity(&self) -> bool {
        self.diagonal && (0..self.dim).all(|i| self.matrix[i * self.dim + i] == S::one())
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> S {
        self.matrix[i * self.dim + j]
    }

    /// `½ Σ_j σ_ij²` for each row `i`.
    pub fn half_row_variance(&self) -> Vec<S> {
        (0..self.dim)
            .map(|i| {
                S::lit(0.5)
                    * (0..self.dim)
                        .map(|j| self.entry(i, j) * self.entry(i, j))
                        .sum::<S>()
            })
            .collect()
    }

    /// `out = σ⁻¹ x`.
    #[inline]
    pub fn solve_into(&self, x: &[S], out: &mut [S]) {
        if self.diagonal {
            for i in 0..self.dim {
                out[i] = x[i] / self.matrix[i * self.dim + i];
            }
        } else {
            crate::linalg::mat_vec(&self.inverse, x, out);
        }
    }
}

/// Simulated market: Brownian drivers, drift, volatility and log-prices.
#[derive(Debug, Clone)]
pub struct MarketPaths<S> {
    pub ensemble: PathEnsemble<S>,
    /// `μ(t_k)`, `n_steps + 1` slices.
    pub drift: PathField<S>,
    pub sigma: Volatility<S>,
    /// `log S_i(t_k)`, `n_steps + 1` slices.
    pub log_prices: PathField<S>,
    pub s0: Vec<S>,
}

impl<S: Scalar> MarketPaths<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        self.ensemble.grid()
    }
    pub fn n_paths(&self) -> usize {
        self.ensemble.n_paths()
    }
    pub fn dim(&self) -> usize {
        self.ensemble.dim()
    }

    #[inline]
    pub fn price(&self, k: usize, p: usize, i: usize) -> S {
        self.log_prices.get(k, p, i).exp()
    }

    pub fn min_price(&self) -> S {
        self.log_prices
            .iter()
            .fold(S::infinity(), |m, v| m.min(v.exp()))
    }
}

/// Log-Euler stock dynamics:
/// `log S_i += (μ_i − ½Σ_j σ_ij²)Δt + Σ_j σ_ij ΔW_j`.
pub fn simulate_market<S: Scalar>(
    ensemble: PathEnsemble<S>,
    drift: PathField<S>,
    sigma: Volatility<S>,
    s0: Vec<S>,
) -> Result<MarketPaths<S>> {
    let (np, d, n) = (ensemble.n_paths(), ensemble.dim(), ensemble.grid().n_steps());
    if sigma.dim() != d {
        return invalid(format!("sigma is {}x{0}, ensemble has dim {d}", sigma.dim()));
    }
    if drift.n_times() != n + 1 || drift.n_paths() != np || drift.dim() != d {
        return invalid("drift field shape does not match the ensemble");
    }
    if s0.len() != d || s0.iter().any(|s| !(*s > S::zero())) {
        return invalid("initial prices must be positive, one per asset");
    }
    let dt = ensemble.grid().dt();
    let half_var = sigma.half_row_variance();
    let mut log_prices = PathField::zeros(n + 1, np, d);
    let init: Vec<S> = s0.iter().map(|s| s.ln()).collect();
    for chunk in log_prices.slice_mut(0).chunks_mut(d) {
        chunk.copy_from_slice(&init);
    }
    let dw = ensemble.increments();
    for k in 0..n {
        let prev = log_prices.slice(k).to_vec();
        let next = log_prices.slice_mut(k + 1);
        for p in 0..np {
            let w = dw.at(k, p);
            for i in 0..d {
                let mut shock = S::zero();
                for (j, wj) in w.iter().enumerate() {
                    shock += sigma.entry(i, j) * *wj;
                }
                next[p * d + i] = prev[p * d + i] + (drift.get(k, p, i) - half_var[i]) * dt + shock;
            }
        }
    }
    Ok(MarketPaths {
        ensemble,
        drift,
        sigma,
        log_prices,
        s0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid::new(1.0f64, 1).unwrap().times(), &[0.0, 1.0]);
        assert_eq!(TimeGrid::new(2.0f64, 100).unwrap().dt(), 0.02);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(TimeGrid::new(0.0f64, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(TimeGrid::new(-1.0f64, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(TimeGrid::new(1.0f64, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn brownian_rejects_empty() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        assert!(simulate_brownian(&g, 0, 1, 1).is_err());
        assert!(simulate_brownian(&g, 1, 0, 1).is_err());
    }

    #[test]
    fn negative_prior_variance_rejected() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        let e = simulate_brownian(&g, 2, 1, 1).unwrap();
        let m = DriftModel::constant_gaussian(0.1, -0.01);
        assert!(matches!(simulate_drift(&m, &e, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn singular_sigma_is_model_error() {
        let r = Volatility::new(vec![1.0f64, 2.0, 2.0, 4.0], 2, 1e-8);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn weakly_elliptic_sigma_rejected() {
        let r = Volatility::new(vec![1e-3f64], 1, 1e-4);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn seed_streams_are_distinct() {
        let s = SeedStreams::from_master(7);
        assert_ne!(s.brownian, s.drift);
        assert_ne!(s.drift, s.aux);
    }

    #[test]
    fn coarsen_sums_increments() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        let e = simulate_brownian(&g, 3, 1, 5).unwrap();
        let c = e.coarsen(2).unwrap();
        for p in 0..3 {
            let fine = e.increments();
            assert_eq!(c.increments().get(0, p, 0), fine.get(0, p, 0) + fine.get(1, p, 0));
        }
        assert!(e.coarsen(3).is_err());
    }
}
