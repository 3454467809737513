//! Worst-case priors and the K-ignorance utility of a terminal wealth.

use serde::{Deserialize, Serialize};

use crate::bsde::{solve_bsde, BsdeConfig};
use crate::dual::{ControlProcess, UtilitySpec};
use crate::error::{invalid, Result};
use crate::field::PathField;
use crate::filter::FilteredMarket;
use crate::generator::GeneratorSpec;
use crate::regression::RegressionState;
use crate::scalar::Scalar;
use crate::stats::{weighted_mean, Estimate};

/// Problem data of the K-ignorance model: one asset with unit volatility.
#[derive(Debug, Clone)]
pub struct KScenario<S> {
    pub k: S,
    pub util: UtilitySpec<S>,
    pub x: S,
}

impl<S: Scalar> KScenario<S> {
    pub fn new(k: S, util: UtilitySpec<S>, x: S) -> Result<Self> {
        if !(k >= S::zero()) || !k.is_finite() {
            return invalid(format!("K must satisfy K >= 0, got {k}"));
        }
        if !x.is_finite() {
            return invalid("initial wealth must be finite");
        }
        Ok(Self { k, util, x })
    }

    /// The model assumes `d = 1` and `σ ≡ 1`.
    pub fn check_market(&self, fm: &FilteredMarket<S>) -> Result<()> {
        if fm.dim() != 1 || !fm.sigma.is_identity() {
            return invalid("K-ignorance scenarios need one asset with unit volatility");
        }
        Ok(())
    }

    pub fn generator(&self) -> GeneratorSpec<S> {
        GeneratorSpec::k_ignorance(self.k).expect("validated K")
    }
}

/// `γ̂` together with `log Z_γ̂(t) = log L̂(t) − log Γ^{0,γ̂}_{0,t}`.
#[derive(Debug, Clone)]
pub struct WorstCasePrior<S> {
    pub control: ControlProcess<S>,
    pub log_z: PathField<S>,
}

impl<S: Scalar> WorstCasePrior<S> {
    pub fn new(control: ControlProcess<S>, fm: &FilteredMarket<S>) -> Result<Self> {
        let log_z = control.log_density_ratio(fm)?;
        Ok(Self { control, log_z })
    }

    pub fn gamma_hat(&self) -> &PathField<S> {
        &self.control.gamma
    }

    #[inline]
    pub fn z_gamma(&self, k: usize, p: usize) -> S {
        self.log_z.get(k, p, 0).exp()
    }

    pub fn terminal_z(&self) -> Vec<S> {
        let n = self.log_z.n_times() - 1;
        (0..self.log_z.n_paths()).map(|p| self.z_gamma(n, p)).collect()
    }
}

/// `E_γ[X]` by self-normalized Girsanov weights `Γ^{0,γ}_{0,T}`; exact when
/// `X` is constant.
pub fn expectation_under<S: Scalar>(
    values: &[S],
    control: &ControlProcess<S>,
    fm: &FilteredMarket<S>,
) -> Result<Estimate<S>> {
    if values.len() != fm.n_paths() {
        return invalid("values have the wrong number of paths");
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(Estimate::exact(values[0]));
    }
    let w = control.kernel(fm)?.terminal();
    let m = weighted_mean(&w, values);
    let sw: S = w.iter().copied().sum();
    let ss: S = w.iter().zip(values).map(|(w, v)| *w * *w * (*v - m) * (*v - m)).sum();
    Ok(Estimate::sampled(m, ss.sqrt() / sw))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KUtilityReport {
    pub y0: Estimate<f64>,
    /// `E_γ[u(ξ)]` for `γ = −K sign(Z)` (ties at `Z = 0` resolved to `−K`).
    pub bang_bang: Estimate<f64>,
    pub difference: f64,
    pub tolerance: f64,
    pub consistent: bool,
}

/// `Y(0) = inf_{|γ|≤K} E_γ[u(ξ)]` from the BSDE with driver `−K|z|`,
/// cross-checked against the bang-bang prior read off its `Z`.
pub fn kignorance_utility<S: Scalar>(
    xi: &[S],
    k: S,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    cfg: &BsdeConfig<S>,
) -> Result<KUtilityReport> {
    let gen = GeneratorSpec::k_ignorance(k)?;
    if xi.len() != fm.n_paths() {
        return invalid("terminal wealth has the wrong number of paths");
    }
    let terminal: Vec<S> = xi.iter().map(|v| util.u(*v)).collect();
    let state = RegressionState::for_market(fm);
    let sol = solve_bsde(&gen, &terminal, fm, &state, cfg)?;
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    let mut gamma = PathField::zeros(n, np, d);
    for kk in 0..n {
        for p in 0..np {
            let z = sol.z.at(kk, p);
            let norm = z.iter().fold(S::zero(), |s, v| s + *v * *v).sqrt();
            let g = gamma.at_mut(kk, p);
            if norm > S::zero() {
                for j in 0..d {
                    g[j] = (-k * z[j] / norm).max(-k).min(k);
                }
            } else {
                g[0] = -k;
            }
        }
    }
    let bang = ControlProcess {
        beta: PathField::zeros(n, np, 1),
        gamma,
        bound: k,
        adapted: true,
    };
    let bb = expectation_under(&terminal, &bang, fm)?;
    let y0 = sol.y0.map(|v| v.as_f64());
    let bb = bb.map(|v| v.as_f64());
    let difference = bb.value - y0.value;
    let tolerance = 4.0 * y0.combined_stderr(&bb) + 1e-2 * y0.value.abs().max(1e-3);
    Ok(KUtilityReport {
        consistent: difference.abs() <= tolerance,
        y0,
        bang_bang: bb,
        difference,
        tolerance,
    })
}
