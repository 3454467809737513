//! Minimization of the dual value over the control set.

use serde::{Deserialize, Serialize};

use super::control::ControlProcess;
use super::fenchel::FenchelOptions;
use super::search::compass_minimize;
use super::utility::{UtilityKind, UtilitySpec};
use super::value::dual_value_samples;
use crate::bsde::{solve_bsde, BsdeConfig};
use crate::error::{invalid, Error, Result};
use crate::field::PathField;
use crate::filter::FilteredMarket;
use crate::generator::{log_auxiliary_argmin, DriverKind, GeneratorSpec};
use crate::regression::RegressionState;
use crate::scalar::Scalar;
use crate::stats::{mean, mean_var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MinimizerMethod {
    /// Effective domain of `F` is a single point.
    Singleton,
    /// `γ̂ = (−K) ∨ (−η̂) ∧ K`.
    Clamp,
    /// `γ̂ = −η̂`, admissible because `|η̂| ≤ K` everywhere.
    RiskNeutral,
    /// Argmin of the auxiliary driver along the auxiliary BSDE.
    AuxiliaryBsde,
    /// Parametric compass search; carries no optimality guarantee.
    BestEffort { converged: bool, evaluations: usize },
}

impl MinimizerMethod {
    /// True when the minimizer does not depend on the multiplier.
    pub fn zeta_invariant(&self) -> bool {
        !matches!(self, MinimizerMethod::BestEffort { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Minimizer<S> {
    pub control: ControlProcess<S>,
    pub method: MinimizerMethod,
    /// Set when the result is best-effort and the search did not converge.
    pub flagged: bool,
    /// Auxiliary BSDE value `y(0)`, when one was solved.
    pub auxiliary_y0: Option<crate::stats::Estimate<S>>,
}

#[derive(Debug, Clone, Copy)]
pub struct DualOptions<S> {
    pub bsde: BsdeConfig<S>,
    pub fenchel: FenchelOptions<S>,
    /// Time buckets of the parametric best-effort family.
    pub buckets: usize,
    pub max_evals: usize,
}

impl<S: Scalar> Default for DualOptions<S> {
    fn default() -> Self {
        Self {
            bsde: BsdeConfig::default(),
            fenchel: FenchelOptions::default(),
            buckets: 4,
            max_evals: 300,
        }
    }
}

/// Projection of `−η̂` onto the Euclidean ball of radius `K`.
pub(crate) fn clamp_control<S: Scalar>(fm: &FilteredMarket<S>, k: S) -> ControlProcess<S> {
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    let mut gamma = PathField::zeros(n, np, d);
    for kk in 0..n {
        for p in 0..np {
            let e = fm.eta_hat.at(kk, p);
            let g = gamma.at_mut(kk, p);
            if d == 1 {
                g[0] = (-e[0]).max(-k).min(k);
            } else {
                let norm = e.iter().fold(S::zero(), |s, v| s + *v * *v).sqrt();
                let scale = if norm > k { k / norm } else { S::one() };
                for j in 0..d {
                    g[j] = -e[j] * scale;
                }
            }
        }
    }
    ControlProcess {
        beta: PathField::zeros(n, np, 1),
        gamma,
        bound: k,
        adapted: true,
    }
}

/// Controls minimizing `Ṽ(ζ; β, γ)`.
pub fn minimize_dual<S: Scalar>(
    zeta: S,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &DualOptions<S>,
) -> Result<Minimizer<S>> {
    if !gen.is_concave {
        return invalid(format!("driver {} is not concave", gen.label()));
    }
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    let plain = |control, method| Minimizer {
        control,
        method,
        flagged: false,
        auxiliary_y0: None,
    };
    match &gen.kind {
        DriverKind::Zero => Ok(plain(ControlProcess::zero(n, np, d, S::zero()), MinimizerMethod::Singleton)),
        DriverKind::Linear { beta, gamma } => {
            if gamma.len() != d {
                return invalid("linear driver dimension differs from the market");
            }
            Ok(plain(
                ControlProcess::constant(n, np, *beta, gamma, gen.lipschitz)?,
                MinimizerMethod::Singleton,
            ))
        }
        DriverKind::KIgnorance { k } => {
            let k = *k;
            if k == S::zero() {
                return Ok(plain(ControlProcess::zero(n, np, d, S::zero()), MinimizerMethod::Singleton));
            }
            if fm.eta_hat.max_abs() <= k && d == 1 {
                return Ok(plain(clamp_control(fm, k), MinimizerMethod::RiskNeutral));
            }
            if matches!(util.kind, UtilityKind::Log) && d == 1 {
                return log_auxiliary_minimizer(fm, k, &opts.bsde);
            }
            if matches!(util.kind, UtilityKind::Cara { .. }) || fm.mu_hat_is_deterministic() {
                return Ok(plain(clamp_control(fm, k), MinimizerMethod::Clamp));
            }
            best_effort(zeta, fm, util, gen, opts)
        }
        _ => best_effort(zeta, fm, util, gen, opts),
    }
}

/// Solves `y_t = ∫_t^T f(s, z_s) ds − ∫_t^T z dŴ` with the three-branch
/// driver and reads off the minimizing `γ̂`.
pub(crate) fn log_auxiliary_minimizer<S: Scalar>(
    fm: &FilteredMarket<S>,
    k: S,
    cfg: &BsdeConfig<S>,
) -> Result<Minimizer<S>> {
    let (n, np) = (fm.n_steps(), fm.n_paths());
    if fm.dim() != 1 {
        return Err(Error::NotImplemented("auxiliary log BSDE is one-dimensional".into()));
    }
    let aux = GeneratorSpec::log_auxiliary(k)?;
    let state = RegressionState::for_market(fm);
    let sol = solve_bsde(&aux, &vec![S::zero(); np], fm, &state, cfg)?;
    let mut gamma = PathField::zeros(n, np, 1);
    for kk in 0..n {
        for p in 0..np {
            let g = log_auxiliary_argmin(k, fm.eta_hat.get(kk, p, 0), sol.z.get(kk, p, 0));
            gamma.set(kk, p, 0, g);
        }
    }
    Ok(Minimizer {
        control: ControlProcess {
            beta: PathField::zeros(n, np, 1),
            gamma,
            bound: k,
            adapted: true,
        },
        method: MinimizerMethod::AuxiliaryBsde,
        flagged: false,
        auxiliary_y0: Some(sol.y0),
    })
}

/// Standardized state features per step: `[1, x_1, ..., x_q]`.
fn features<S: Scalar>(fm: &FilteredMarket<S>) -> Vec<Vec<Vec<S>>> {
    let state = RegressionState::for_market(fm);
    (0..fm.n_steps())
        .map(|k| {
            let mut f = vec![vec![S::one(); fm.n_paths()]];
            for c in state.values(k) {
                let (m, v) = mean_var(&c);
                let sd = v.max(S::zero()).sqrt();
                if sd > S::lit(1e-12) * (S::one() + m.abs()) {
                    f.push(c.iter().map(|x| (*x - m) / sd).collect());
                } else {
                    f.push(vec![S::zero(); fm.n_paths()]);
                }
            }
            f
        })
        .collect()
}

fn parametric_control<S: Scalar>(
    theta: &[S],
    feats: &[Vec<Vec<S>>],
    buckets: usize,
    n_paths: usize,
    d: usize,
    bound: S,
    beta_free: bool,
) -> ControlProcess<S> {
    let n = feats.len();
    let nf = feats[0].len();
    let outputs = 1 + d;
    let mut beta = PathField::zeros(n, n_paths, 1);
    let mut gamma = PathField::zeros(n, n_paths, d);
    for k in 0..n {
        let b = (k * buckets / n).min(buckets - 1);
        for o in 0..outputs {
            if o == 0 && !beta_free {
                continue;
            }
            let th = &theta[(b * outputs + o) * nf..(b * outputs + o + 1) * nf];
            for p in 0..n_paths {
                let mut s = S::zero();
                for f in 0..nf {
                    s += th[f] * feats[k][f][p];
                }
                let v = (bound * s.tanh()).max(-bound).min(bound);
                if o == 0 {
                    beta.set(k, p, 0, v);
                } else {
                    gamma.set(k, p, o - 1, v);
                }
            }
        }
    }
    ControlProcess {
        beta,
        gamma,
        bound,
        adapted: true,
    }
}

/// Compass search over a bucketed, state-feature parametrization with a
/// few starts; the zero control and, for K-ignorance, the clamp are kept
/// as candidates.
fn best_effort<S: Scalar>(
    zeta: S,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &DualOptions<S>,
) -> Result<Minimizer<S>> {
    let (np, d) = (fm.n_paths(), fm.dim());
    let bound = gen.lipschitz;
    let beta_free = !matches!(gen.kind, DriverKind::KIgnorance { .. } | DriverKind::LogAuxiliary { .. });
    let buckets = opts.buckets.max(1);
    let feats = features(fm);
    let nf = feats.first().map_or(1, Vec::len);
    let n_params = buckets * (1 + d) * nf;
    let objective = |c: &ControlProcess<S>| -> Result<S> {
        Ok(match dual_value_samples(zeta, c, fm, util, gen, &opts.fenchel)? {
            Some(s) => mean(&s),
            None => S::max_value(),
        })
    };
    let mut best: Option<(S, ControlProcess<S>)> = None;
    let consider = |v: S, c: ControlProcess<S>, best: &mut Option<(S, ControlProcess<S>)>| {
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            *best = Some((v, c));
        }
    };
    let zero = ControlProcess::zero(fm.n_steps(), np, d, bound);
    consider(objective(&zero)?, zero, &mut best);
    if let DriverKind::KIgnorance { k } = gen.kind {
        let c = clamp_control(fm, k);
        consider(objective(&c)?, c, &mut best);
    }
    let mut converged = true;
    let mut evaluations = 0;
    let per_start = opts.max_evals / 3;
    for start in [S::zero(), S::lit(0.55), S::lit(-0.55)] {
        let mut x0 = vec![S::zero(); n_params];
        for b in 0..buckets {
            for o in 0..1 + d {
                if o == 0 && !beta_free {
                    continue;
                }
                x0[(b * (1 + d) + o) * nf] = start;
            }
        }
        let mut err = None;
        let res = compass_minimize(
            |th| {
                let c = parametric_control(th, &feats, buckets, np, d, bound, beta_free);
                match objective(&c) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        S::max_value()
                    }
                }
            },
            &x0,
            S::lit(-4.0),
            S::lit(4.0),
            S::lit(0.5),
            S::lit(1e-3),
            per_start,
        );
        if let Some(e) = err {
            return Err(e);
        }
        evaluations += res.evaluations;
        converged &= res.converged;
        let c = parametric_control(&res.x, &feats, buckets, np, d, bound, beta_free);
        consider(res.value, c, &mut best);
    }
    let (_, control) = best.expect("at least one candidate");
    Ok(Minimizer {
        control,
        method: MinimizerMethod::BestEffort { converged, evaluations },
        flagged: !converged,
        auxiliary_y0: None,
    })
}
