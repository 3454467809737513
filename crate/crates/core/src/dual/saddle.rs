//! Saddle point construction and verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::control::ControlProcess;
use super::minimize::{DualOptions, MinimizerMethod};
use super::multiplier::solve_multiplier;
use super::utility::{Domain, UtilitySpec};
use super::value::{dual_value_samples, primal_value_samples};
use crate::bsde::{solve_bsde, BsdeSolution};
use crate::error::{invalid, Result};
use crate::field::PathField;
use crate::filter::FilteredMarket;
use crate::generator::{DriverKind, GeneratorSpec};
use crate::regression::{Basis, RegressionState, StepFit};
use crate::scalar::Scalar;
use crate::stats::{mean_var, Estimate};

/// `ξ̂ = I(ζ̂ L̂(T)/Γ_{0,T})` per path.
pub fn optimal_terminal_wealth<S: Scalar>(
    zeta: S,
    control: &ControlProcess<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
) -> Result<Vec<S>> {
    if !(zeta > S::zero()) {
        return invalid(format!("multiplier must be positive, got {zeta}"));
    }
    let kernel = control.kernel(fm)?;
    let n = fm.n_steps();
    Ok((0..fm.n_paths())
        .map(|p| {
            let r = (fm.log_l_hat.get(n, p, 0) - kernel.log_gamma_0t(n, p)).exp();
            util.inverse_marginal(zeta * r)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct DualSolution<S> {
    pub zeta_hat: S,
    /// Delta-method standard error of `ζ̂`; zero for closed forms.
    pub zeta_stderr: S,
    pub control: ControlProcess<S>,
    pub xi_hat: Vec<S>,
    /// Recursive utility of `ξ̂`: `Y(0)` of the BSDE with terminal `u(ξ̂)`.
    pub v_lower: Estimate<S>,
    /// `E[∫Γ̂F̂ ds + Γ̂ u(ξ̂)]`.
    pub v_upper: Estimate<S>,
    /// `Ṽ(ζ̂) + ζ̂x`.
    pub v_star: Estimate<S>,
    /// `E[L̂(T) ξ̂]`.
    pub budget: Estimate<S>,
    pub budget_gap: S,
    pub x: S,
    pub method: MinimizerMethod,
    pub flagged: bool,
    /// Sample second moment of `ξ̂` is finite and agrees between the first
    /// half of the paths and all of them within a factor of two.
    pub square_integrable: bool,
    pub auxiliary_y0: Option<Estimate<S>>,
    pub value_bsde: Option<BsdeSolution<S>>,
}

/// Regression state for utilities of `ξ̂`: the market coordinates plus
/// `u(I(ζ Z_γ(t)))`, the utility of the wealth the investor would lock in at
/// `t`. That coordinate is affine in the exact solution for exponential and
/// logarithmic utility whenever the coefficients are deterministic, and a
/// good proxy otherwise.
pub fn value_state<'a, S: Scalar>(
    fm: &'a FilteredMarket<S>,
    control: &ControlProcess<S>,
    zeta: S,
    util: &UtilitySpec<S>,
) -> Result<RegressionState<'a, S>> {
    let state = RegressionState::for_market(fm);
    let log_z = control.log_density_ratio(fm)?;
    if log_z.iter().all(|v| *v == S::zero()) || affine_in_state(&log_z, &state)? {
        return Ok(state);
    }
    let myopic: Vec<S> = log_z.iter().map(|v| util.u(util.inverse_marginal(zeta * v.exp()))).collect();
    let coord = if myopic.iter().all(|v| v.is_finite()) {
        PathField::from_vec(log_z.n_times(), log_z.n_paths(), 1, myopic)
    } else {
        log_z
    };
    Ok(state.with_owned(coord, 0))
}

/// Whether every slice of `field` is an affine function of the state
/// coordinates. A coordinate built from such a field is redundant, and the
/// near-collinear basis it creates amplifies regression noise.
fn affine_in_state<S: Scalar>(field: &PathField<S>, state: &RegressionState<'_, S>) -> Result<bool> {
    let np = field.n_paths();
    let linear = Basis::new(1, usize::MAX);
    for k in 0..field.n_times() {
        let target = field.component(k, 0);
        let scale = target.iter().fold(S::one(), |m, v| m.max(v.abs()));
        let fit = StepFit::fit(&state.values(k), np, linear, S::lit(1e-12), k)?;
        let fitted = fit.project(&target);
        let off = target.iter().zip(&fitted).any(|(a, b)| (*a - *b).abs() > S::lit(1e-8) * scale);
        if off {
            return Ok(false);
        }
    }
    Ok(true)
}

fn second_moment_stable<S: Scalar>(xi: &[S]) -> bool {
    let m2 = |s: &[S]| s.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / s.len().max(1) as f64;
    let all = m2(xi);
    let half = m2(&xi[..xi.len() / 2]);
    if !all.is_finite() || !half.is_finite() {
        return false;
    }
    if all == 0.0 {
        return half == 0.0;
    }
    let r = half / all;
    (0.5..=2.0).contains(&r)
}

/// Multiplier, minimizer, terminal wealth and the three value estimates.
pub fn solve_dual<S: Scalar>(
    x: S,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &DualOptions<S>,
) -> Result<DualSolution<S>> {
    let ms = solve_multiplier(x, fm, util, gen, opts)?;
    let control = ms.minimizer.control;
    let zeta = ms.zeta;
    let xi = if matches!(ms.minimizer.method, MinimizerMethod::RiskNeutral) {
        // Γ̂ ≡ L̂, so ξ̂ = I(u'(x)) = x without rounding
        vec![x; fm.n_paths()]
    } else {
        optimal_terminal_wealth(zeta, &control, fm, util)?
    };
    let mut sol = assemble(x, zeta, control, xi, fm, util, gen, opts, ms.minimizer.method, ms.minimizer.flagged, ms.minimizer.auxiliary_y0)?;
    sol.zeta_stderr = ms.stderr;
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble<S: Scalar>(
    x: S,
    zeta: S,
    control: ControlProcess<S>,
    xi: Vec<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &DualOptions<S>,
    method: MinimizerMethod,
    flagged: bool,
    auxiliary_y0: Option<Estimate<S>>,
) -> Result<DualSolution<S>> {
    let n = fm.n_steps();
    let budget_samples: Vec<S> = xi.iter().enumerate().map(|(p, v)| fm.l_hat(n, p) * *v).collect();
    let budget = if xi.iter().all(|v| *v == xi[0]) && fm.log_l_hat.slice(n).iter().all(|v| *v == S::zero()) {
        Estimate::exact(xi[0])
    } else {
        Estimate::from_samples(&budget_samples)
    };
    let terminal: Vec<S> = xi.iter().map(|v| util.u(*v)).collect();
    let state = value_state(fm, &control, zeta, util)?;
    let bsde = solve_bsde(gen, &terminal, fm, &state, &opts.bsde)?;
    let v_lower = bsde.y0;
    let v_upper = match primal_value_samples(&xi, &control, fm, util, gen, &opts.fenchel)? {
        Some(s) if s.iter().all(|v| *v == s[0]) => Estimate::exact(s[0]),
        Some(s) => Estimate::from_samples(&s),
        None => Estimate::exact(S::infinity()),
    };
    let v_star = match dual_value_samples(zeta, &control, fm, util, gen, &opts.fenchel)? {
        Some(s) => {
            let shifted: Vec<S> = s.iter().map(|v| *v + zeta * x).collect();
            Estimate::from_samples(&shifted)
        }
        None => Estimate::exact(S::infinity()),
    };
    Ok(DualSolution {
        zeta_hat: zeta,
        zeta_stderr: S::zero(),
        budget_gap: (budget.value - x).abs(),
        square_integrable: second_moment_stable(&xi),
        xi_hat: xi,
        control,
        v_lower,
        v_upper,
        v_star,
        budget,
        x,
        method,
        flagged,
        auxiliary_y0,
        value_bsde: Some(bsde),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlternativeCheck {
    pub label: String,
    /// Mean paired difference (alternative minus candidate); `+∞` when the
    /// alternative has infinite dual value.
    pub difference: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleReport {
    pub control_checks: Vec<AlternativeCheck>,
    pub terminal_checks: Vec<AlternativeCheck>,
    pub control_violations: usize,
    pub terminal_violations: usize,
    /// `V̄ − V̲`.
    pub upper_lower_gap: f64,
    pub upper_lower_stderr: f64,
    pub pass: bool,
}

fn paired(alt: Option<Vec<f64>>, base: &[f64]) -> (f64, f64) {
    match alt {
        None => (f64::INFINITY, 0.0),
        Some(a) => {
            let d: Vec<f64> = a.iter().zip(base).map(|(x, y)| x - y).collect();
            let (m, v) = mean_var(&d);
            (m, (v / d.len().max(1) as f64).sqrt())
        }
    }
}

fn to_f64<S: Scalar>(v: Option<Vec<S>>) -> Option<Vec<f64>> {
    v.map(|s| s.into_iter().map(|x| x.as_f64()).collect())
}

/// Standardized terminal log-price, used to build perturbations.
fn terminal_feature<S: Scalar>(fm: &FilteredMarket<S>) -> Vec<f64> {
    let n = fm.n_steps();
    let raw: Vec<f64> = (0..fm.n_paths()).map(|p| fm.log_prices.get(n, p, 0).as_f64()).collect();
    let (m, v) = mean_var(&raw);
    let sd = v.sqrt().max(1e-300);
    raw.into_iter().map(|x| (x - m) / sd).collect()
}

/// Adapted alternatives in the effective domain of `F`: constants at the
/// edges, sign switches, mixtures with the candidate and smooth logistic
/// perturbations of it. Generated lazily; alternative `i` depends only on
/// `seed` and `i`.
pub fn alternative_controls<'a, S: Scalar>(
    candidate: &'a ControlProcess<S>,
    fm: &'a FilteredMarket<S>,
    gen: &GeneratorSpec<S>,
    count: usize,
    seed: u64,
) -> impl Iterator<Item = (String, ControlProcess<S>)> + 'a {
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    let (radius, beta_free, singleton) = match gen.kind {
        DriverKind::KIgnorance { k } | DriverKind::LogAuxiliary { k } => (k, false, false),
        DriverKind::Zero | DriverKind::Linear { .. } => (gen.lipschitz, false, true),
        DriverKind::Custom { .. } => (gen.lipschitz, true, false),
    };
    let project = move |g: &mut [S]| {
        let norm = g.iter().fold(S::zero(), |s, v| s + *v * *v).sqrt();
        if norm > radius {
            let scale = radius / norm;
            g.iter_mut().for_each(|v| *v = (*v * scale).max(-radius).min(radius));
        }
    };
    let feature: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let raw: Vec<f64> = (0..np).map(|p| fm.log_prices.get(k, p, 0).as_f64()).collect();
            let (m, v) = mean_var(&raw);
            let sd = v.sqrt();
            raw.into_iter()
                .map(|x| if sd > 1e-12 { (x - m) / sd } else { 0.0 })
                .collect()
        })
        .collect();
    (0..count).map(move |i| {
        if singleton {
            return (format!("singleton-{i}"), candidate.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let family = i % 4;
        let sign = if rng.random_bool(0.5) { S::one() } else { -S::one() };
        let switch = rng.random_range(0..=n);
        let lambda = S::lit(rng.random_range(0.0..1.0));
        let (a, b, c) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.0..1.0),
        );
        let label = match family {
            0 => format!("constant-{}", if sign > S::zero() { "+" } else { "-" }),
            1 => format!("switch-at-{switch}"),
            2 => format!("mixture-{:.3}", lambda.as_f64()),
            _ => "logistic".to_string(),
        };
        let mut gamma = PathField::zeros(n, np, d);
        let mut beta = PathField::zeros(n, np, 1);
        for k in 0..n {
            for p in 0..np {
                let g = gamma.at_mut(k, p);
                let cand = candidate.gamma.at(k, p);
                for j in 0..d {
                    g[j] = match family {
                        0 => sign * radius,
                        1 => {
                            if k < switch {
                                sign * radius
                            } else {
                                -sign * radius
                            }
                        }
                        2 => lambda * cand[j] + (S::one() - lambda) * sign * radius,
                        _ => cand[j] + S::lit(a * (b * feature[k][p] + c).tanh()) * radius,
                    };
                }
                project(g);
                if beta_free {
                    let bv = candidate.beta.get(k, p, 0);
                    let v = match family {
                        0 | 1 => -sign * radius,
                        2 => lambda * bv,
                        _ => bv + S::lit(a * c) * radius,
                    };
                    beta.set(k, p, 0, v.max(-radius).min(radius));
                }
            }
        }
        (
            label,
            ControlProcess {
                beta,
                gamma,
                bound: radius.max(candidate.bound),
                adapted: true,
            },
        )
    })
}

/// Budget-feasible perturbations of `ξ̂`: multiplicative and renormalized
/// for positive wealth, additive and centred under `L̂` on the whole line.
pub(crate) fn terminal_perturbations<S: Scalar>(
    xi: &[S],
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    x: S,
    count: usize,
    seed: u64,
) -> Vec<(String, Vec<S>)> {
    let n = fm.n_steps();
    let l: Vec<f64> = (0..fm.n_paths()).map(|p| fm.l_hat(n, p).as_f64()).collect();
    let f = terminal_feature(fm);
    let w: Vec<f64> = (0..fm.n_paths())
        .map(|p| (0..n).map(|k| fm.w_hat.get(k, p, 0).as_f64()).sum())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let lsum: f64 = l.iter().sum();
    for i in 0..count {
        let eps = rng.random_range(0.02..0.4) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0));
        let h: Vec<f64> = match i % 4 {
            0 => f.iter().map(|v| (a * v + b).tanh()).collect(),
            1 => w.iter().map(|v| (a * v + b).cos()).collect(),
            2 => f.iter().map(|v| if *v > b { 1.0 } else { -1.0 }).collect(),
            _ => f.iter().zip(&w).map(|(u, v)| (a * u * v).sin()).collect(),
        };
        let label = format!("perturbation-{i}");
        let candidate: Vec<S> = match util.domain() {
            Domain::PositiveWealth => {
                let raw: Vec<f64> = xi.iter().zip(&h).map(|(v, h)| v.as_f64() * (eps * h).exp()).collect();
                let spent: f64 = raw.iter().zip(&l).map(|(v, l)| v * l).sum::<f64>() / l.len() as f64;
                let c = x.as_f64() / spent;
                raw.into_iter().map(|v| S::lit(v * c)).collect()
            }
            Domain::WholeLine => {
                let centre = h.iter().zip(&l).map(|(h, l)| h * l).sum::<f64>() / lsum;
                xi.iter()
                    .zip(&h)
                    .map(|(v, h)| *v + S::lit(eps * (h - centre)))
                    .collect()
            }
        };
        out.push((label, candidate));
    }
    out
}

/// Checks the saddle inequalities with common random numbers:
/// (a) no alternative control lowers the dual value beyond `4σ`;
/// (b) no budget-feasible perturbation raises `E[∫Γ̂F̂ + Γ̂u(ξ)]` beyond
/// `4σ`; (c) reports `V̄ − V̲`.
pub fn verify_saddle<S: Scalar>(
    sol: &DualSolution<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    n_alternatives: usize,
    seed: u64,
    opts: &DualOptions<S>,
) -> Result<SaddleReport> {
    let base = to_f64(dual_value_samples(sol.zeta_hat, &sol.control, fm, util, gen, &opts.fenchel)?)
        .ok_or_else(|| crate::error::Error::Degenerate("candidate control has infinite dual value".into()))?;
    let mut control_checks = vec![{
        let (d, se) = paired(Some(base.clone()), &base);
        AlternativeCheck {
            label: "candidate".into(),
            difference: d,
            stderr: se,
            pass: d == 0.0,
        }
    }];
    for (label, alt) in alternative_controls(&sol.control, fm, gen, n_alternatives, seed) {
        let (d, se) = paired(
            to_f64(dual_value_samples(sol.zeta_hat, &alt, fm, util, gen, &opts.fenchel)?),
            &base,
        );
        control_checks.push(AlternativeCheck {
            label,
            difference: d,
            stderr: se,
            pass: d >= -4.0 * se - 1e-12 * base_scale(&base),
        });
    }
    let primal = to_f64(primal_value_samples(&sol.xi_hat, &sol.control, fm, util, gen, &opts.fenchel)?)
        .ok_or_else(|| crate::error::Error::Degenerate("candidate control has infinite primal bound".into()))?;
    let mut terminal_checks = Vec::new();
    for (label, xi) in terminal_perturbations(&sol.xi_hat, fm, util, sol.x, n_alternatives, seed ^ 0x7E57) {
        let (d, se) = paired(
            to_f64(primal_value_samples(&xi, &sol.control, fm, util, gen, &opts.fenchel)?),
            &primal,
        );
        terminal_checks.push(AlternativeCheck {
            label,
            difference: d,
            stderr: se,
            pass: d <= 4.0 * se + 1e-12 * base_scale(&primal),
        });
    }
    let control_violations = control_checks.iter().filter(|c| !c.pass).count();
    let terminal_violations = terminal_checks.iter().filter(|c| !c.pass).count();
    Ok(SaddleReport {
        upper_lower_gap: (sol.v_upper.value - sol.v_lower.value).as_f64(),
        upper_lower_stderr: sol.v_upper.combined_stderr(&sol.v_lower).as_f64(),
        pass: control_violations == 0 && terminal_violations == 0,
        control_checks,
        terminal_checks,
        control_violations,
        terminal_violations,
    })
}

fn base_scale(xs: &[f64]) -> f64 {
    xs.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}
