//! Closed-form saddle points of the K-ignorance examples.

use serde::{Deserialize, Serialize};

use super::quadrature::gauss_hermite_normal;
use super::worst_case::{KScenario, WorstCasePrior};
use crate::bsde::BsdeConfig;
use crate::dual::{assemble, clamp_control, log_auxiliary_minimizer, ControlProcess, DualOptions, DualSolution, MinimizerMethod, UtilityKind, UtilitySpec};
use crate::error::{invalid, Result};
use crate::filter::FilteredMarket;
use crate::market::{DeterministicDrift, TimeGrid};
use crate::scalar::Scalar;
use crate::stats::{mean_var, Estimate};

#[derive(Debug, Clone)]
pub struct CaraRecord<S> {
    pub prior: WorstCasePrior<S>,
    /// `Ẽ∫(μ̂ + γ̂)² dt` under the risk-neutral measure.
    pub integral: Estimate<S>,
    pub zeta_hat: Estimate<S>,
    pub xi_hat: Vec<S>,
    /// `1 − ζ̂/α`.
    pub y0: Estimate<S>,
}

impl<S: Scalar> CaraRecord<S> {
    /// The verified solution `Y(t) = 1 − (ζ̂/α) Z_γ̂(t)`.
    pub fn y(&self, alpha: S, k: usize, p: usize) -> S {
        S::one() - self.zeta_hat.value / alpha * self.prior.z_gamma(k, p)
    }
}

fn squared_gap_integral<S: Scalar>(fm: &FilteredMarket<S>, control: &ControlProcess<S>) -> Estimate<S> {
    let (n, np) = (fm.n_steps(), fm.n_paths());
    let dt = fm.grid.dt();
    let per_path: Vec<S> = (0..np)
        .map(|p| {
            (0..n).fold(S::zero(), |s, k| {
                let v = fm.eta_hat.get(k, p, 0) + control.gamma.get(k, p, 0);
                s + v * v * dt
            })
        })
        .collect();
    if per_path.iter().all(|v| *v == per_path[0]) {
        return Estimate::exact(per_path[0]);
    }
    let weighted: Vec<S> = per_path.iter().enumerate().map(|(p, v)| fm.l_hat(n, p) * *v).collect();
    Estimate::from_samples(&weighted)
}

/// Exponential utility: `γ̂ = (−K) ∨ (−μ̂) ∧ K`,
/// `ζ̂ = α exp(−½Ẽ∫(μ̂+γ̂)² − αx)`, `ξ̂ = −ln(ζ̂ Z_γ̂(T)/α)/α`.
pub fn cara_saddle<S: Scalar>(scn: &KScenario<S>, fm: &FilteredMarket<S>) -> Result<CaraRecord<S>> {
    scn.check_market(fm)?;
    let UtilityKind::Cara { alpha } = scn.util.kind else {
        return invalid("exponential saddle needs CARA utility");
    };
    let control = clamp_control(fm, scn.k);
    let integral = squared_gap_integral(fm, &control);
    let half = S::lit(0.5);
    let z = alpha * (-half * integral.value - alpha * scn.x).exp();
    let zeta_hat = Estimate {
        value: z,
        stderr: z * half * integral.stderr,
        exact: integral.exact,
    };
    let prior = WorstCasePrior::new(control, fm)?;
    let xi_hat = prior
        .terminal_z()
        .iter()
        .map(|zt| -(z * *zt / alpha).ln() / alpha)
        .collect();
    let y0 = Estimate {
        value: S::one() - z / alpha,
        stderr: zeta_hat.stderr / alpha,
        exact: zeta_hat.exact,
    };
    Ok(CaraRecord {
        prior,
        integral,
        zeta_hat,
        xi_hat,
        y0,
    })
}

#[derive(Debug, Clone)]
pub struct LogRecord<S> {
    pub prior: WorstCasePrior<S>,
    /// `y(0)` of the auxiliary BSDE.
    pub auxiliary_y0: Estimate<S>,
    /// `1/x`.
    pub zeta_hat: S,
    pub xi_hat: Vec<S>,
    /// `ln x + ½ y(0)`.
    pub y0: Estimate<S>,
    /// `E[L̂(T) ξ̂]`.
    pub budget: Estimate<S>,
}

/// Logarithmic utility: `γ̂` from the auxiliary BSDE, `ζ̂ = 1/x`,
/// `ξ̂ = x / Z_γ̂(T)`.
pub fn log_saddle<S: Scalar>(scn: &KScenario<S>, fm: &FilteredMarket<S>, cfg: &BsdeConfig<S>) -> Result<LogRecord<S>> {
    scn.check_market(fm)?;
    if !matches!(scn.util.kind, UtilityKind::Log) {
        return invalid("logarithmic saddle needs log utility");
    }
    if !(scn.x > S::zero()) {
        return invalid(format!("initial wealth must be positive, got {}", scn.x));
    }
    let m = log_auxiliary_minimizer(fm, scn.k, cfg)?;
    let aux = m.auxiliary_y0.expect("auxiliary solve");
    let prior = WorstCasePrior::new(m.control, fm)?;
    let xi_hat: Vec<S> = prior.terminal_z().iter().map(|z| scn.x / *z).collect();
    let n = fm.n_steps();
    let spent: Vec<S> = xi_hat.iter().enumerate().map(|(p, v)| fm.l_hat(n, p) * *v).collect();
    let half = S::lit(0.5);
    Ok(LogRecord {
        prior,
        auxiliary_y0: aux,
        zeta_hat: scn.x.recip(),
        xi_hat,
        y0: Estimate {
            value: scn.x.ln() + half * aux.value,
            stderr: half * aux.stderr,
            exact: aux.exact,
        },
        budget: Estimate::from_samples(&spent),
    })
}

/// `γ̂(t) = (−K) ∨ (−μ(t)) ∧ K` for a known deterministic drift.
#[derive(Debug, Clone)]
pub struct DeterministicMinimizer<S> {
    pub drift: DeterministicDrift<S>,
    pub k: S,
}

impl<S: Scalar> DeterministicMinimizer<S> {
    pub fn value(&self, t: S) -> S {
        (-self.drift.value(t, 0)).max(-self.k).min(self.k)
    }

    /// Values at the left endpoints of the grid steps.
    pub fn on_grid(&self, grid: &TimeGrid<S>) -> Vec<S> {
        (0..grid.n_steps()).map(|k| self.value(grid.time(k))).collect()
    }
}

pub fn deterministic_mu_minimizer<S: Scalar>(drift: &DeterministicDrift<S>, k: S) -> Result<DeterministicMinimizer<S>> {
    if !(k >= S::zero()) {
        return invalid(format!("K must satisfy K >= 0, got {k}"));
    }
    Ok(DeterministicMinimizer {
        drift: drift.clone(),
        k,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmartingaleReport {
    /// Smallest per-step mean increment of `v(t, M_γ(t))`, in standard
    /// errors.
    pub min_standardized_drift: f64,
    pub total_increment: Estimate<f64>,
    pub pass: bool,
}

/// Drift test for `v(t, M_γ(t))`, `v(t, x) = Ẽ[g(x M_γ̂(T)/M_γ̂(t))]`,
/// `g(x) = x ũ(ζ/x)`, on paths simulated under the risk-neutral measure.
/// `v` is evaluated by Gauss–Hermite quadrature over the lognormal ratio.
pub fn submartingale_check<S: Scalar>(
    fm_tilde: &FilteredMarket<S>,
    alternative: &ControlProcess<S>,
    minimizer: &DeterministicMinimizer<S>,
    util: &UtilitySpec<S>,
    zeta: S,
) -> Result<SubmartingaleReport> {
    if fm_tilde.dim() != 1 {
        return invalid("submartingale check is one-dimensional");
    }
    let (n, np) = (fm_tilde.n_steps(), fm_tilde.n_paths());
    let grid = &fm_tilde.grid;
    let dt = grid.dt().as_f64();
    let gh = minimizer.on_grid(grid);
    let mut tail = vec![0.0f64; n + 1];
    for k in (0..n).rev() {
        let s = (minimizer.drift.value(grid.time(k), 0) + gh[k]).as_f64();
        tail[k] = tail[k + 1] + s * s * dt;
    }
    let (nodes, weights) = gauss_hermite_normal(48);
    let zeta = zeta.as_f64();
    let g = |x: f64| x * util.conjugate(S::lit(zeta / x)).as_f64();
    let v = |k: usize, x: f64| -> f64 {
        let var = tail[k];
        if var == 0.0 {
            return g(x);
        }
        let sd = var.sqrt();
        nodes
            .iter()
            .zip(&weights)
            .map(|(z, w)| w * g(x * (sd * z - 0.5 * var).exp()))
            .sum()
    };
    let log_m = alternative.log_density_ratio(fm_tilde)?;
    let mut prev: Vec<f64> = (0..np).map(|p| v(0, (-log_m.get(0, p, 0)).as_f64().exp())).collect();
    let start = prev.clone();
    let mut min_std = f64::INFINITY;
    for k in 0..n {
        let cur: Vec<f64> = (0..np).map(|p| v(k + 1, (-log_m.get(k + 1, p, 0)).as_f64().exp())).collect();
        let inc: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let (m, var) = mean_var(&inc);
        let se = (var / np as f64).sqrt();
        let z = if se > 0.0 { m / se } else if m >= -1e-12 { 0.0 } else { f64::NEG_INFINITY };
        min_std = min_std.min(z);
        prev = cur;
    }
    let total: Vec<f64> = prev.iter().zip(&start).map(|(a, b)| a - b).collect();
    let total = Estimate::from_samples(&total);
    let pass = min_std >= -4.0 && total.value >= -4.0 * total.stderr - 1e-12;
    Ok(SubmartingaleReport {
        min_standardized_drift: min_std,
        total_increment: total,
        pass,
    })
}

/// Drift bounded by `K`: `γ̂ = −μ̂`, `ξ̂ ≡ x`, `ζ̂ = u'(x)` and
/// `Y(0) = u(x)` exactly.
pub fn small_mu_case<S: Scalar>(
    scn: &KScenario<S>,
    fm: &FilteredMarket<S>,
    opts: &DualOptions<S>,
) -> Result<DualSolution<S>> {
    scn.check_market(fm)?;
    let sup = fm.eta_hat.max_abs();
    if sup > scn.k {
        return invalid(format!("sup |mu_hat| = {sup} exceeds K = {}", scn.k));
    }
    let control = clamp_control(fm, scn.k);
    let zeta = scn.util.u_prime(scn.x);
    let xi = vec![scn.x; fm.n_paths()];
    assemble(
        scn.x,
        zeta,
        control,
        xi,
        fm,
        &scn.util,
        &scn.generator(),
        opts,
        MinimizerMethod::RiskNeutral,
        false,
        None,
    )
}
