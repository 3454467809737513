//! The budget multiplier `ζ̂` solving `E[L̂(T) I(ζ L̂(T)/Γ_{0,T})] = x`.

use super::control::ControlProcess;
use super::minimize::{minimize_dual, DualOptions, Minimizer, MinimizerMethod};
use super::utility::{Domain, UtilityKind, UtilitySpec};
use crate::error::{invalid, Error, Result};
use crate::filter::FilteredMarket;
use crate::generator::GeneratorSpec;
use crate::scalar::Scalar;
use crate::stats::mean_var;

const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone)]
pub struct MultiplierSolution<S> {
    pub zeta: S,
    pub minimizer: Minimizer<S>,
    /// Sample budget residual `g(ζ̂)`.
    pub residual: S,
    pub iterations: usize,
    /// Sampling error of `ζ̂` by the delta method, `se(g)/|g'(ζ̂)|`; zero
    /// for closed forms.
    pub stderr: S,
}

/// Sample budget function for a fixed control.
pub(crate) struct Budget<S> {
    l_hat: Vec<S>,
    log_ratio: Vec<S>,
    x: S,
}

impl<S: Scalar> Budget<S> {
    pub(crate) fn new(fm: &FilteredMarket<S>, control: &ControlProcess<S>, x: S) -> Result<Self> {
        let kernel = control.kernel(fm)?;
        let n = fm.n_steps();
        let log_ratio = (0..fm.n_paths())
            .map(|p| fm.log_l_hat.get(n, p, 0) - kernel.log_gamma_0t(n, p))
            .collect();
        Ok(Self {
            l_hat: fm.terminal_density(),
            log_ratio,
            x,
        })
    }

    /// Standard error of `g(ζ)` and a central-difference slope `g'(ζ)`.
    pub(crate) fn zeta_stderr(&self, zeta: S, util: &UtilitySpec<S>) -> S {
        let spent: Vec<S> = self
            .l_hat
            .iter()
            .zip(&self.log_ratio)
            .map(|(l, r)| *l * util.inverse_marginal(zeta * r.exp()))
            .collect();
        if spent.iter().all(|v| *v == spent[0]) {
            return S::zero();
        }
        let (_, var) = mean_var(&spent);
        let se = (var / S::from_usize_lossy(spent.len())).sqrt();
        let h = S::lit(1e-5);
        let slope = (self.eval(zeta * (S::one() + h), util) - self.eval(zeta * (S::one() - h), util)) / (S::lit(2.0) * h * zeta);
        if slope == S::zero() || !slope.is_finite() {
            return S::infinity();
        }
        se / slope.abs()
    }

    pub(crate) fn eval(&self, zeta: S, util: &UtilitySpec<S>) -> S {
        let mut s = S::zero();
        for (l, r) in self.l_hat.iter().zip(&self.log_ratio) {
            s += *l * util.inverse_marginal(zeta * r.exp());
        }
        s / S::from_usize_lossy(self.l_hat.len()) - self.x
    }

    /// Bracket expansion from `ζ = 1`, then bisection in `log ζ`.
    pub(crate) fn solve(&self, util: &UtilitySpec<S>) -> Result<(S, S, usize)> {
        let two = S::lit(2.0);
        let mut iters = 0;
        let g1 = self.eval(S::one(), util);
        let (mut lo, mut hi, mut g_lo, mut g_hi);
        if g1 == S::zero() {
            return Ok((S::one(), g1, 0));
        }
        if g1 > S::zero() {
            lo = S::one();
            g_lo = g1;
            hi = two;
            g_hi = self.eval(hi, util);
            while g_hi > S::zero() {
                iters += 1;
                if iters > MAX_DOUBLINGS {
                    return Err(Error::Infeasible(format!(
                        "no multiplier bracket for x = {} after {MAX_DOUBLINGS} doublings",
                        self.x
                    )));
                }
                lo = hi;
                g_lo = g_hi;
                hi = hi * two;
                g_hi = self.eval(hi, util);
            }
        } else {
            hi = S::one();
            g_hi = g1;
            lo = S::lit(0.5);
            g_lo = self.eval(lo, util);
            while g_lo < S::zero() {
                iters += 1;
                if iters > MAX_DOUBLINGS {
                    return Err(Error::Infeasible(format!(
                        "no multiplier bracket for x = {} after {MAX_DOUBLINGS} halvings",
                        self.x
                    )));
                }
                hi = lo;
                g_hi = g_lo;
                lo = lo / two;
                g_lo = self.eval(lo, util);
            }
        }
        if !g_lo.is_finite() || !g_hi.is_finite() {
            return Err(Error::Solver("budget function is not finite on the bracket".into()));
        }
        let target = S::lit(1e-12) * S::one().max(self.x.abs());
        let (mut best, mut g_best) = if g_lo.abs() < g_hi.abs() { (lo, g_lo) } else { (hi, g_hi) };
        for _ in 0..MAX_BISECTIONS {
            if g_best.abs() <= target || hi / lo - S::one() <= S::lit(1e-13) {
                break;
            }
            iters += 1;
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.eval(mid, util);
            if g.abs() < g_best.abs() {
                best = mid;
                g_best = g;
            }
            if g > S::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((best, g_best, iters))
    }
}

/// `exp(Σ β_k Δt)` when `β` does not vary across paths.
fn deterministic_discount<S: Scalar>(control: &ControlProcess<S>, fm: &FilteredMarket<S>) -> Option<S> {
    let mut acc = S::zero();
    for k in 0..control.beta.n_times() {
        let s = control.beta.slice(k);
        if s.iter().any(|b| *b != s[0]) {
            return None;
        }
        acc += s[0] * fm.grid.dt();
    }
    Some(acc.exp())
}

/// Root of the sample budget function. Minimizers that depend on `ζ` are
/// refreshed at each outer iterate until the multiplier settles.
pub fn solve_multiplier<S: Scalar>(
    x: S,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &DualOptions<S>,
) -> Result<MultiplierSolution<S>> {
    if !x.is_finite() || (util.domain() == Domain::PositiveWealth && !(x > S::zero())) {
        return invalid(format!("initial wealth must be positive for {} utility, got {x}", util.label()));
    }
    let mut zeta = S::one();
    let mut minimizer = minimize_dual(zeta, fm, util, gen, opts)?;
    // Log utility: E[L̂ Γ/(ζ L̂)] = E[Γ]/ζ, and E[Γ_{0,T}] = exp(∫β dt) when β
    // is the same on every path, so ζ̂ = exp(∫β dt)/x (1/x for β ≡ 0).
    // Γ ≡ L̂ gives I(ζ̂) = x. The sample residual is kept as is.
    let closed = match (&util.kind, &minimizer.method) {
        (UtilityKind::Log, _) => deterministic_discount(&minimizer.control, fm).map(|g| g / x),
        (_, MinimizerMethod::RiskNeutral) => Some(util.u_prime(x)),
        _ => None,
    };
    if let Some(zeta) = closed {
        let residual = Budget::new(fm, &minimizer.control, x)?.eval(zeta, util);
        return Ok(MultiplierSolution {
            zeta,
            minimizer,
            residual,
            iterations: 0,
            stderr: S::zero(),
        });
    }
    let mut total = 0;
    for round in 0..4 {
        let budget = Budget::new(fm, &minimizer.control, x)?;
        let (z, residual, iters) = budget.solve(util)?;
        total += iters;
        let settled = (z / zeta - S::one()).abs() <= S::lit(1e-6);
        zeta = z;
        if minimizer.method.zeta_invariant() || (round > 0 && settled) || round == 3 {
            return Ok(MultiplierSolution {
                stderr: budget.zeta_stderr(zeta, util),
                zeta,
                minimizer,
                residual,
                iterations: total,
            });
        }
        minimizer = minimize_dual(zeta, fm, util, gen, opts)?;
    }
    unreachable!("the refresh loop returns on its last round")
}
