//! Reduction to full information: filtered drift, innovation process,
//! state-price density and Girsanov kernels on the observation filtration.

use crate::error::{invalid, Error, Result};
use crate::field::PathField;
use crate::market::{DriftKind, DriftModel, MarketPaths, PathEnsemble, TimeGrid, Volatility};
use crate::scalar::Scalar;

/// `η = σ⁻¹ μ` for every path and time slice.
pub fn risk_premium<S: Scalar>(mu: &PathField<S>, sigma: &Volatility<S>) -> Result<PathField<S>> {
    let d = mu.dim();
    if sigma.dim() != d {
        return invalid("risk premium: sigma and drift dimensions differ");
    }
    let mut eta = PathField::zeros(mu.n_times(), mu.n_paths(), d);
    for k in 0..mu.n_times() {
        for p in 0..mu.n_paths() {
            let (src, dst) = (mu.at(k, p).to_vec(), eta.at_mut(k, p));
            sigma.solve_into(&src, dst);
        }
    }
    Ok(eta)
}

/// Which filter produced `μ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    /// Drift known: `μ̂ = μ`.
    FullInformation,
    /// Conjugate Gaussian update, constant drift.
    ConjugateGaussian,
    /// Discrete Kalman filter for the Euler-discretized mean-reverting drift.
    Kalman,
}

/// Scalar Kalman recursion shared by the constant-Gaussian and
/// mean-reverting drift laws. With zero reversion and zero drift noise the
/// update is exactly the conjugate Gaussian posterior.
#[derive(Debug, Clone)]
pub(crate) struct DriftFilter<S> {
    kind: FilterKind,
    prior_mean: S,
    long_run: S,
    rate: S,
    dt: S,
    /// Observation variance per unit time, `σ_ii²`, per component.
    obs_var: Vec<S>,
    /// Predictive variance of `μ(t_k)` given observations before `t_k`, per
    /// step and component (`n_steps + 1` rows).
    variance: Vec<Vec<S>>,
    /// Kalman gain applied to the observation of step `k`.
    gain: Vec<Vec<S>>,
}

impl<S: Scalar> DriftFilter<S> {
    pub(crate) fn new(model: &DriftModel<S>, sigma: &Volatility<S>, grid: &TimeGrid<S>) -> Result<Self> {
        model.validate()?;
        let d = sigma.dim();
        let dt = grid.dt();
        let n = grid.n_steps();
        let (kind, prior_mean, prior_var, rate, long_run, vol) = match &model.kind {
            DriftKind::Deterministic(_) => {
                return Ok(Self {
                    kind: FilterKind::FullInformation,
                    prior_mean: S::zero(),
                    long_run: S::zero(),
                    rate: S::zero(),
                    dt,
                    obs_var: vec![S::zero(); d],
                    variance: vec![vec![S::zero(); d]; n + 1],
                    gain: vec![vec![S::zero(); d]; n],
                })
            }
            DriftKind::ConstantGaussian { mean, variance } => (
                FilterKind::ConjugateGaussian,
                *mean,
                *variance,
                S::zero(),
                S::zero(),
                S::zero(),
            ),
            DriftKind::OrnsteinUhlenbeck {
                rate,
                long_run,
                vol,
                mean,
                variance,
            } => (FilterKind::Kalman, *mean, *variance, *rate, *long_run, *vol),
        };
        if !sigma.is_diagonal() {
            return Err(Error::NotImplemented(
                "drift filtering requires a diagonal volatility matrix".into(),
            ));
        }
        let obs_var: Vec<S> = (0..d).map(|i| sigma.entry(i, i) * sigma.entry(i, i)).collect();
        let mut variance = Vec::with_capacity(n + 1);
        let mut gain = Vec::with_capacity(n);
        let mut p = vec![prior_var; d];
        variance.push(p.clone());
        let decay = S::one() - rate * dt;
        for _ in 0..n {
            let mut g = vec![S::zero(); d];
            for i in 0..d {
                g[i] = p[i] / (p[i] * dt + obs_var[i]);
                let updated = p[i] * obs_var[i] / (p[i] * dt + obs_var[i]);
                p[i] = decay * decay * updated + vol * vol * dt;
            }
            gain.push(g);
            variance.push(p.clone());
        }
        Ok(Self {
            kind,
            prior_mean,
            long_run,
            rate,
            dt,
            obs_var,
            variance,
            gain,
        })
    }

    pub(crate) fn kind(&self) -> FilterKind {
        self.kind
    }

    /// Given the predictive mean at step `k` and the step-`k` observation
    /// `y = Δlog S + ½σ²Δt`, returns the predictive mean at step `k + 1`.
    #[inline]
    pub(crate) fn advance(&self, k: usize, i: usize, mean: S, y: S) -> S {
        let updated = mean + self.gain[k][i] * (y - mean * self.dt);
        updated + self.rate * (self.long_run - updated) * self.dt
    }

    pub(crate) fn posterior_variance(&self) -> &[Vec<S>] {
        &self.variance
    }

    #[allow(dead_code)]
    pub(crate) fn observation_variance(&self) -> &[S] {
        &self.obs_var
    }
}

/// Output of [`filter_drift`].
#[derive(Debug, Clone)]
pub struct DriftEstimate<S> {
    pub kind: FilterKind,
    /// `μ̂(t_k)`, `n_steps + 1` slices.
    pub mu_hat: PathField<S>,
    /// Conditional variance of `μ(t_k)` per step and component (identical
    /// across paths since σ is known and constant).
    pub posterior_variance: Vec<Vec<S>>,
}

/// Filter estimate `μ̂(t_k) = E[μ(t_k) | observations before t_k]`.
pub fn filter_drift<S: Scalar>(model: &DriftModel<S>, market: &MarketPaths<S>) -> Result<DriftEstimate<S>> {
    let grid = market.grid();
    let filter = DriftFilter::new(model, &market.sigma, grid)?;
    if filter.kind() == FilterKind::FullInformation {
        return Ok(DriftEstimate {
            kind: FilterKind::FullInformation,
            mu_hat: market.drift.clone(),
            posterior_variance: filter.posterior_variance().to_vec(),
        });
    }
    let (np, d, n) = (market.n_paths(), market.dim(), grid.n_steps());
    let half_var = market.sigma.half_row_variance();
    let dt = grid.dt();
    let mut mu_hat = PathField::filled(n + 1, np, d, filter.prior_mean);
    for k in 0..n {
        for p in 0..np {
            for i in 0..d {
                let y = market.log_prices.get(k + 1, p, i) - market.log_prices.get(k, p, i) + half_var[i] * dt;
                let next = filter.advance(k, i, mu_hat.get(k, p, i), y);
                mu_hat.set(k + 1, p, i, next);
            }
        }
    }
    Ok(DriftEstimate {
        kind: filter.kind(),
        mu_hat,
        posterior_variance: filter.posterior_variance().to_vec(),
    })
}

/// Innovation increments `dŴ = dW + (η − η̂)dt`.
pub fn innovation<S: Scalar>(market: &MarketPaths<S>, mu_hat: &PathField<S>) -> Result<PathField<S>> {
    let eta = risk_premium(&market.drift, &market.sigma)?;
    let eta_hat = risk_premium(mu_hat, &market.sigma)?;
    let dt = market.grid().dt();
    let dw = market.ensemble.increments();
    let (np, d, n) = (market.n_paths(), market.dim(), market.grid().n_steps());
    let mut w_hat = PathField::zeros(n, np, d);
    for k in 0..n {
        for p in 0..np {
            for j in 0..d {
                let v = dw.get(k, p, j) + (eta.get(k, p, j) - eta_hat.get(k, p, j)) * dt;
                w_hat.set(k, p, j, v);
            }
        }
    }
    Ok(w_hat)
}

/// Innovation increments computed from observations only:
/// `dŴ = σ⁻¹(dlog S + ½diag(σσ')dt) − η̂ dt`.
pub fn innovation_from_observations<S: Scalar>(
    market: &MarketPaths<S>,
    mu_hat: &PathField<S>,
) -> Result<PathField<S>> {
    let eta_hat = risk_premium(mu_hat, &market.sigma)?;
    let dt = market.grid().dt();
    let half_var = market.sigma.half_row_variance();
    let (np, d, n) = (market.n_paths(), market.dim(), market.grid().n_steps());
    let mut w_hat = PathField::zeros(n, np, d);
    let mut obs = vec![S::zero(); d];
    let mut whitened = vec![S::zero(); d];
    for k in 0..n {
        for p in 0..np {
            for i in 0..d {
                obs[i] = market.log_prices.get(k + 1, p, i) - market.log_prices.get(k, p, i) + half_var[i] * dt;
            }
            market.sigma.solve_into(&obs, &mut whitened);
            for j in 0..d {
                w_hat.set(k, p, j, whitened[j] - eta_hat.get(k, p, j) * dt);
            }
        }
    }
    Ok(w_hat)
}

/// Accumulates `log X(t_{k+1}) = log X(t_k) + a_k Δt + b_k·ΔŴ_k` from
/// `log X(0) = 0`. `coefficients(k, p, b)` writes `b` and returns `a`.
pub(crate) fn accumulate_log_exponential<S: Scalar>(
    w_hat: &PathField<S>,
    dt: S,
    mut coefficients: impl FnMut(usize, usize, &mut [S]) -> S,
) -> PathField<S> {
    let (n, np, d) = (w_hat.n_times(), w_hat.n_paths(), w_hat.dim());
    let mut out = PathField::zeros(n + 1, np, 1);
    let mut b = vec![S::zero(); d];
    for k in 0..n {
        for p in 0..np {
            let a = coefficients(k, p, &mut b);
            let w = w_hat.at(k, p);
            let mut inc = a * dt;
            for j in 0..d {
                inc += b[j] * w[j];
            }
            let prev = out.get(k, p, 0);
            out.set(k + 1, p, 0, prev + inc);
        }
    }
    out
}

/// `log L̂(t) = −Σ η̂'ΔŴ − ½Σ|η̂|²Δt` (with σ = I, η̂ = μ̂).
pub fn log_state_price_density<S: Scalar>(
    eta_hat: &PathField<S>,
    w_hat: &PathField<S>,
    grid: &TimeGrid<S>,
) -> Result<PathField<S>> {
    if eta_hat.n_times() < w_hat.n_times() || eta_hat.n_paths() != w_hat.n_paths() || eta_hat.dim() != w_hat.dim() {
        return invalid("state price density: η̂ and Ŵ shapes differ");
    }
    let half = S::lit(0.5);
    Ok(accumulate_log_exponential(w_hat, grid.dt(), |k, p, b| {
        let e = eta_hat.at(k, p);
        let mut sq = S::zero();
        for j in 0..b.len() {
            b[j] = -e[j];
            sq += e[j] * e[j];
        }
        -half * sq
    }))
}

/// `L̂(t_k)` per path (`n_steps + 1` slices, one component).
pub fn state_price_density<S: Scalar>(
    eta_hat: &PathField<S>,
    w_hat: &PathField<S>,
    grid: &TimeGrid<S>,
) -> Result<PathField<S>> {
    let log = log_state_price_density(eta_hat, w_hat, grid)?;
    let (n, np) = (log.n_times(), log.n_paths());
    Ok(PathField::from_vec(n, np, 1, log.into_vec().into_iter().map(|v| v.exp()).collect()))
}

/// The market seen through the observation filtration.
#[derive(Debug, Clone)]
pub struct FilteredMarket<S> {
    pub grid: TimeGrid<S>,
    pub sigma: Volatility<S>,
    pub kind: FilterKind,
    /// `μ̂(t_k)`, `n_steps + 1` slices.
    pub mu_hat: PathField<S>,
    /// `η̂ = σ⁻¹μ̂`, `n_steps + 1` slices.
    pub eta_hat: PathField<S>,
    /// Innovation increments, `n_steps` slices.
    pub w_hat: PathField<S>,
    /// `log L̂(t_k)`, `n_steps + 1` slices, one component.
    pub log_l_hat: PathField<S>,
    /// Observed `log S(t_k)`.
    pub log_prices: PathField<S>,
    pub posterior_variance: Vec<Vec<S>>,
}

/// Context handed to a drift shift while building innovation-driven paths.
#[derive(Debug)]
pub struct ShiftState<'a, S> {
    pub step: usize,
    pub t: S,
    pub path: usize,
    pub mu_hat: &'a [S],
    /// `Ŵ(t_k)` accumulated so far.
    pub w_hat: &'a [S],
}

impl<S: Scalar> FilteredMarket<S> {
    /// Filters a simulated market: `μ̂`, `Ŵ`, `L̂`.
    pub fn from_market(model: &DriftModel<S>, market: &MarketPaths<S>) -> Result<Self> {
        let est = filter_drift(model, market)?;
        let w_hat = innovation(market, &est.mu_hat)?;
        let eta_hat = risk_premium(&est.mu_hat, &market.sigma)?;
        let log_l_hat = log_state_price_density(&eta_hat, &w_hat, market.grid())?;
        Ok(Self {
            grid: market.grid().clone(),
            sigma: market.sigma.clone(),
            kind: est.kind,
            mu_hat: est.mu_hat,
            eta_hat,
            w_hat,
            log_l_hat,
            log_prices: market.log_prices.clone(),
            posterior_variance: est.posterior_variance,
        })
    }

    /// Builds the full-observation market directly from innovation
    /// increments `dŴ = dB + shift·dt`, where `B` is the supplied ensemble and
    /// the shift may depend on the filter state at `t_k`. With a zero shift
    /// `Ŵ` is a Brownian motion under the simulation measure; with shift `γ`
    /// the paths are distributed as under `P_γ`.
    pub fn simulate_innovations(
        model: &DriftModel<S>,
        sigma: &Volatility<S>,
        s0: &[S],
        ensemble: &PathEnsemble<S>,
        shift: impl Fn(&ShiftState<'_, S>, &mut [S]),
    ) -> Result<Self> {
        let grid = ensemble.grid().clone();
        let (np, d, n) = (ensemble.n_paths(), ensemble.dim(), grid.n_steps());
        if sigma.dim() != d || s0.len() != d {
            return invalid("sigma, s0 and ensemble dimensions differ");
        }
        let filter = DriftFilter::new(model, sigma, &grid)?;
        let dt = grid.dt();
        let half_var = sigma.half_row_variance();
        let bound = model.bound_for(&grid, d);
        let deterministic = match &model.kind {
            DriftKind::Deterministic(f) => Some(f.clone()),
            _ => None,
        };
        let mut mu_hat = PathField::filled(n + 1, np, d, filter.prior_mean);
        if let Some(f) = &deterministic {
            for k in 0..=n {
                let row: Vec<S> = (0..d)
                    .map(|i| f.value(grid.time(k), i).max(-bound).min(bound))
                    .collect();
                for chunk in mu_hat.slice_mut(k).chunks_mut(d) {
                    chunk.copy_from_slice(&row);
                }
            }
        }
        let mut w_hat = PathField::zeros(n, np, d);
        let mut log_prices = PathField::zeros(n + 1, np, d);
        let init: Vec<S> = s0.iter().map(|s| s.ln()).collect();
        for chunk in log_prices.slice_mut(0).chunks_mut(d) {
            chunk.copy_from_slice(&init);
        }
        let mut cum_w = vec![S::zero(); np * d];
        let mut shift_buf = vec![S::zero(); d];
        let mut shock = vec![S::zero(); d];
        let db = ensemble.increments();
        for k in 0..n {
            let t = grid.time(k);
            for p in 0..np {
                for v in shift_buf.iter_mut() {
                    *v = S::zero();
                }
                {
                    let state = ShiftState {
                        step: k,
                        t,
                        path: p,
                        mu_hat: mu_hat.at(k, p),
                        w_hat: &cum_w[p * d..(p + 1) * d],
                    };
                    shift(&state, &mut shift_buf);
                }
                for j in 0..d {
                    let inc = db.get(k, p, j) + shift_buf[j] * dt;
                    w_hat.set(k, p, j, inc);
                    cum_w[p * d + j] += inc;
                }
                for i in 0..d {
                    let mut s = S::zero();
                    for j in 0..d {
                        s += sigma.entry(i, j) * w_hat.get(k, p, j);
                    }
                    shock[i] = s;
                }
                for i in 0..d {
                    let m = mu_hat.get(k, p, i);
                    let lp = log_prices.get(k, p, i) + (m - half_var[i]) * dt + shock[i];
                    log_prices.set(k + 1, p, i, lp);
                    if deterministic.is_none() {
                        let y = (m * dt) + shock[i];
                        mu_hat.set(k + 1, p, i, filter.advance(k, i, m, y));
                    }
                }
            }
        }
        let eta_hat = risk_premium(&mu_hat, sigma)?;
        let log_l_hat = log_state_price_density(&eta_hat, &w_hat, &grid)?;
        Ok(Self {
            grid,
            sigma: sigma.clone(),
            kind: filter.kind(),
            mu_hat,
            eta_hat,
            w_hat,
            log_l_hat,
            log_prices,
            posterior_variance: filter.posterior_variance().to_vec(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.w_hat.n_paths()
    }
    pub fn dim(&self) -> usize {
        self.w_hat.dim()
    }
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    #[inline]
    pub fn l_hat(&self, k: usize, p: usize) -> S {
        self.log_l_hat.get(k, p, 0).exp()
    }

    /// `L̂(T)` per path.
    pub fn terminal_density(&self) -> Vec<S> {
        let n = self.n_steps();
        (0..self.n_paths()).map(|p| self.l_hat(n, p)).collect()
    }

    pub fn terminal_log_density(&self) -> Vec<S> {
        self.log_l_hat.component(self.n_steps(), 0)
    }

    /// `sup |μ̂|` over paths, steps and components.
    pub fn max_abs_mu_hat(&self) -> S {
        self.mu_hat.max_abs()
    }

    /// True when `μ̂(t_k)` is identical across paths at every step.
    pub fn mu_hat_is_deterministic(&self) -> bool {
        (0..=self.n_steps()).all(|k| {
            let s = self.mu_hat.slice(k);
            let d = self.dim();
            s.chunks(d).all(|c| c == &s[..d])
        })
    }
}

/// Discounting/measure-change kernel
/// `Γ_{0,t} = exp(Σ(β − ½|γ|²)Δt + Σγ'ΔŴ)`.
#[derive(Debug, Clone)]
pub struct GirsanovKernel<'a, S> {
    pub beta: &'a PathField<S>,
    pub gamma: &'a PathField<S>,
    /// Per-step exponent increments, `n_steps` slices.
    log_increment: PathField<S>,
    /// `log Γ_{0,t_k}`, `n_steps + 1` slices.
    log_gamma: PathField<S>,
}

impl<S: Scalar> GirsanovKernel<'_, S> {
    #[inline]
    pub fn gamma_0t(&self, k: usize, p: usize) -> S {
        self.log_gamma.get(k, p, 0).exp()
    }

    #[inline]
    pub fn log_gamma_0t(&self, k: usize, p: usize) -> S {
        self.log_gamma.get(k, p, 0)
    }

    /// `Γ_{s,t}` on path `p`, accumulated from the per-step factors.
    pub fn between(&self, p: usize, s: usize, t: usize) -> S {
        (s..t)
            .map(|k| self.log_increment.get(k, p, 0))
            .sum::<S>()
            .exp()
    }

    pub fn terminal(&self) -> Vec<S> {
        let n = self.log_gamma.n_times() - 1;
        (0..self.log_gamma.n_paths()).map(|p| self.gamma_0t(n, p)).collect()
    }

    pub fn log_field(&self) -> &PathField<S> {
        &self.log_gamma
    }
}

/// Builds `Γ^{β,γ}` for controls inside the box `[−C, C]^{1+d}`.
pub fn girsanov_kernel<'a, S: Scalar>(
    beta: &'a PathField<S>,
    gamma: &'a PathField<S>,
    w_hat: &PathField<S>,
    grid: &TimeGrid<S>,
    box_bound: S,
) -> Result<GirsanovKernel<'a, S>> {
    let (n, np, d) = (w_hat.n_times(), w_hat.n_paths(), w_hat.dim());
    if beta.n_times() != n || beta.n_paths() != np || beta.dim() != 1 {
        return invalid("beta must have one component per path and step");
    }
    if gamma.n_times() != n || gamma.n_paths() != np || gamma.dim() != d {
        return invalid("gamma must match the innovation shape");
    }
    let tol = box_bound * S::lit(1e-12);
    if beta.iter().chain(gamma.iter()).any(|v| !(v.abs() <= box_bound + tol)) {
        return invalid(format!("controls leave the box [-{box_bound}, {box_bound}]"));
    }
    let dt = grid.dt();
    let half = S::lit(0.5);
    let mut log_increment = PathField::zeros(n, np, 1);
    for k in 0..n {
        for p in 0..np {
            let g = gamma.at(k, p);
            let w = w_hat.at(k, p);
            let mut sq = S::zero();
            let mut mart = S::zero();
            for j in 0..d {
                sq += g[j] * g[j];
                mart += g[j] * w[j];
            }
            log_increment.set(k, p, 0, (beta.get(k, p, 0) - half * sq) * dt + mart);
        }
    }
    let mut log_gamma = PathField::zeros(n + 1, np, 1);
    for k in 0..n {
        for p in 0..np {
            let v = log_gamma.get(k, p, 0) + log_increment.get(k, p, 0);
            log_gamma.set(k + 1, p, 0, v);
        }
    }
    Ok(GirsanovKernel {
        beta,
        gamma,
        log_increment,
        log_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_brownian, simulate_drift, simulate_market};

    fn market(model: &DriftModel<f64>, sigma: Volatility<f64>, n_paths: usize) -> MarketPaths<f64> {
        let g = TimeGrid::new(1.0, 20).unwrap();
        let d = sigma.dim();
        let e = simulate_brownian(&g, n_paths, d, 11).unwrap();
        let mu = simulate_drift(model, &e, 12).unwrap();
        simulate_market(e, mu, sigma, vec![1.0; d]).unwrap()
    }

    #[test]
    fn risk_premium_examples() {
        let mu = PathField::filled(2, 1, 1, 0.2);
        let eta = risk_premium(&mu, &Volatility::identity(1)).unwrap();
        assert_eq!(eta.get(0, 0, 0), 0.2);
        let eta = risk_premium(&mu, &Volatility::scalar(1, 2.0).unwrap()).unwrap();
        assert_eq!(eta.get(1, 0, 0), 0.1);
        let mut mu2 = PathField::zeros(1, 1, 2);
        mu2.set(0, 0, 0, 0.1);
        mu2.set(0, 0, 1, 0.4);
        let eta = risk_premium(&mu2, &Volatility::diagonal(&[1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(eta.at(0, 0), &[0.1, 0.2]);
    }

    #[test]
    fn non_diagonal_sigma_with_unknown_drift_is_not_implemented() {
        let sigma = Volatility::new(vec![1.0, 0.5, 0.0, 1.0], 2, 1e-8).unwrap();
        let model = DriftModel::constant_gaussian(0.1, 0.04);
        let m = market(&model, sigma, 4);
        assert!(matches!(filter_drift(&model, &m), Err(Error::NotImplemented(_))));
    }

    #[test]
    fn degenerate_prior_gives_prior_mean() {
        let model = DriftModel::constant_gaussian(0.1, 0.0);
        let m = market(&model, Volatility::identity(1), 8);
        let est = filter_drift(&model, &m).unwrap();
        assert!(est.mu_hat.iter().all(|v| *v == 0.1));
    }

    #[test]
    fn girsanov_rejects_out_of_box_controls() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let w = PathField::zeros(2, 1, 1);
        let beta = PathField::filled(2, 1, 1, 0.0);
        let gamma = PathField::filled(2, 1, 1, 0.5);
        assert!(matches!(
            girsanov_kernel(&beta, &gamma, &w, &g, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn kernel_with_zero_controls_is_one() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        let w = PathField::filled(3, 2, 1, 0.3);
        let z = PathField::zeros(3, 2, 1);
        let k = girsanov_kernel(&z, &z, &w, &g, 1.0).unwrap();
        assert!(k.terminal().iter().all(|v| *v == 1.0));
    }
}
