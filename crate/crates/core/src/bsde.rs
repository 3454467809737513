//! Backward SDEs driven by the innovation process: regression Monte Carlo
//! for Lipschitz drivers and the kernel representation of linear BSDEs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::PathField;
use crate::filter::{girsanov_kernel, FilteredMarket};
use crate::generator::GeneratorSpec;
use crate::regression::{Basis, RegressionState, StepFit};
use crate::scalar::Scalar;
use crate::stats::{mean_var, Estimate};

#[derive(Debug, Clone, Copy)]
pub struct BsdeConfig<S> {
    pub basis: Basis,
    pub n_picard: usize,
    /// Relative pivot threshold below which basis columns are dropped.
    pub rank_tol: S,
}

impl<S: Scalar> Default for BsdeConfig<S> {
    fn default() -> Self {
        Self {
            basis: Basis::default(),
            n_picard: 3,
            rank_tol: S::lit(1e-10),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BsdeDiagnostics {
    /// RMS of `Y(t_{k+1}) − E[Y(t_{k+1}) | state]` per step.
    pub residual_rms: Vec<f64>,
    pub basis_size: Vec<usize>,
    pub rank: Vec<usize>,
    pub picard_iterations: usize,
    /// Largest change of `Y(t_k)` in the last Picard sweep, per step.
    pub picard_change: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BsdeSolution<S> {
    /// `Y(t_k)`, `n_steps + 1` slices, one component.
    pub y: PathField<S>,
    /// `Z(t_k)`, `n_steps` slices.
    pub z: PathField<S>,
    pub terminal: Vec<S>,
    pub y0: Estimate<S>,
    pub diagnostics: BsdeDiagnostics,
}

impl<S: Scalar> BsdeSolution<S> {
    pub fn n_steps(&self) -> usize {
        self.z.n_times()
    }
    pub fn n_paths(&self) -> usize {
        self.y.n_paths()
    }
}

fn check_terminal<S: Scalar>(terminal: &[S], n_paths: usize) -> Result<()> {
    if terminal.len() != n_paths {
        return invalid(format!("terminal has {} values for {n_paths} paths", terminal.len()));
    }
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("terminal condition is not finite".into()));
    }
    Ok(())
}

fn all_equal<S: PartialEq>(xs: &[S]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Backward-Euler regression scheme:
/// `Z_k = E[(Y_{k+1} − E_k Y_{k+1}) ΔŴ_k | state_k] / Δt` and
/// `Y_k = E[Y_{k+1} | state_k] + f(t_k, Y_k, Z_k) Δt` with Picard sweeps
/// on the implicit `Y_k`.
pub fn solve_bsde<S: Scalar>(
    gen: &GeneratorSpec<S>,
    terminal: &[S],
    fm: &FilteredMarket<S>,
    state: &RegressionState<'_, S>,
    cfg: &BsdeConfig<S>,
) -> Result<BsdeSolution<S>> {
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    check_terminal(terminal, np)?;
    state.check(n, np)?;
    let dt = fm.grid.dt();
    let mut y = PathField::zeros(n + 1, np, 1);
    y.slice_mut(n).copy_from_slice(terminal);
    let mut z = PathField::zeros(n, np, d);
    let mut diag = BsdeDiagnostics {
        residual_rms: vec![0.0; n],
        basis_size: vec![1; n],
        rank: vec![1; n],
        picard_iterations: cfg.n_picard,
        picard_change: vec![0.0; n],
    };
    let mut exact = all_equal(terminal);
    let mut target = vec![S::zero(); np];
    // pathwise ξ + Σ f Δt, whose spread sets the standard error of Y(0)
    let mut pathwise = terminal.to_vec();
    for k in (0..n).rev() {
        let t = fm.grid.time(k);
        let next = y.slice(k + 1).to_vec();
        let cond = if all_equal(&next) {
            vec![next[0]; np]
        } else {
            exact = false;
            let fit = StepFit::fit(&state.values(k), np, cfg.basis, cfg.rank_tol, k)?;
            diag.basis_size[k] = fit.basis_size();
            diag.rank[k] = fit.rank();
            let cond = fit.project(&next);
            let mut ss = S::zero();
            for j in 0..d {
                for p in 0..np {
                    let r = next[p] - cond[p];
                    if j == 0 {
                        ss += r * r;
                    }
                    target[p] = r * fm.w_hat.get(k, p, j) / dt;
                }
                let zj = fit.project(&target);
                for p in 0..np {
                    z.set(k, p, j, zj[p]);
                }
            }
            diag.residual_rms[k] = (ss / S::from_usize_lossy(np)).sqrt().as_f64();
            cond
        };
        let mut change = S::zero();
        let yk = y.slice_mut(k);
        for p in 0..np {
            let zp = z.at(k, p);
            let mu = fm.eta_hat.at(k, p);
            let mut v = cond[p];
            for _ in 0..cfg.n_picard {
                let nv = cond[p] + gen.eval(t, v, zp, mu) * dt;
                change = change.max((nv - v).abs());
                v = nv;
            }
            if cfg.n_picard == 0 {
                v = cond[p] + gen.eval(t, v, zp, mu) * dt;
            }
            if !v.is_finite() {
                return Err(Error::Solver(format!("non-finite Y at step {k}, path {p}")));
            }
            pathwise[p] += v - cond[p];
            yk[p] = v;
        }
        diag.picard_change[k] = change.as_f64();
        if exact && !y.slice_is_constant(k) {
            exact = false;
        }
    }
    let y0 = if exact {
        Estimate::exact(y.get(0, 0, 0))
    } else {
        let (_, var) = mean_var(&pathwise);
        Estimate::sampled(y.get(0, 0, 0), (var / S::from_usize_lossy(np)).sqrt())
    };
    Ok(BsdeSolution {
        y,
        z,
        terminal: terminal.to_vec(),
        y0,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone)]
pub struct LinearBsdeSolution<S> {
    /// `Y(t_k)`; `Y(0)` is a plain Monte Carlo average, later slices are
    /// regression estimates.
    pub y: PathField<S>,
    pub y0: Estimate<S>,
    /// Pathwise `∫Γ_{0,s}F ds + Γ_{0,T}ξ`, whose mean is `Y(0)`.
    pub samples: Vec<S>,
}

/// `Y_t = E[∫_t^T Γ_{t,s}F_s ds + Γ_{t,T}ξ | 𝒢_t]` for the kernel of `(β, γ)`.
pub fn solve_linear_bsde<S: Scalar>(
    beta: &PathField<S>,
    gamma: &PathField<S>,
    f_values: &PathField<S>,
    terminal: &[S],
    fm: &FilteredMarket<S>,
    state: &RegressionState<'_, S>,
    cfg: &BsdeConfig<S>,
) -> Result<LinearBsdeSolution<S>> {
    let (n, np) = (fm.n_steps(), fm.n_paths());
    check_terminal(terminal, np)?;
    state.check(n, np)?;
    if f_values.n_times() != n || f_values.n_paths() != np || f_values.dim() != 1 {
        return invalid("F values must have one component per path and step");
    }
    let kernel = girsanov_kernel(beta, gamma, &fm.w_hat, &fm.grid, S::infinity())?;
    let dt = fm.grid.dt();
    let mut y = PathField::zeros(n + 1, np, 1);
    y.slice_mut(n).copy_from_slice(terminal);
    let mut acc = terminal.to_vec();
    for k in (0..n).rev() {
        for p in 0..np {
            acc[p] = f_values.get(k, p, 0) * dt + kernel.between(p, k, k + 1) * acc[p];
        }
        if k == 0 {
            break;
        }
        if all_equal(&acc) {
            y.slice_mut(k).copy_from_slice(&acc);
        } else {
            let fit = StepFit::fit(&state.values(k), np, cfg.basis, cfg.rank_tol, k)?;
            y.slice_mut(k).copy_from_slice(&fit.project(&acc));
        }
    }
    let y0 = Estimate::from_samples(&acc);
    for p in 0..np {
        y.set(0, p, 0, y0.value);
    }
    Ok(LinearBsdeSolution { y, y0, samples: acc })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub violations: usize,
    pub pairs: usize,
    pub fraction: f64,
    pub tolerance: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Counts `(path, step)` pairs with `Y₁ > Y₂ + tol`, `tol = rel_tol·scale`.
pub fn comparison_check<S: Scalar>(
    sol1: &BsdeSolution<S>,
    sol2: &BsdeSolution<S>,
    rel_tol: f64,
    slack: f64,
) -> Result<ComparisonReport> {
    if !sol1.y.same_shape(&sol2.y) {
        return invalid("comparison requires solutions on the same grid and paths");
    }
    let scale = sol1
        .y
        .iter()
        .chain(sol2.y.iter())
        .fold(1.0f64, |m, v| m.max(v.as_f64().abs()));
    let tol = rel_tol * scale;
    let pairs = sol1.y.as_slice().len();
    let violations = sol1
        .y
        .iter()
        .zip(sol2.y.iter())
        .filter(|(a, b)| a.as_f64() > b.as_f64() + tol)
        .count();
    let fraction = violations as f64 / pairs as f64;
    Ok(ComparisonReport {
        violations,
        pairs,
        fraction,
        tolerance: tol,
        slack,
        pass: fraction <= slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_brownian, DriftModel, Volatility};

    fn fm(n_paths: usize, n_steps: usize) -> FilteredMarket<f64> {
        let g = crate::market::TimeGrid::new(1.0, n_steps).unwrap();
        let e = simulate_brownian(&g, n_paths, 1, 5).unwrap();
        FilteredMarket::simulate_innovations(&DriftModel::constant(0.2), &Volatility::identity(1), &[1.0], &e, |_, _| {})
            .unwrap()
    }

    #[test]
    fn constant_terminal_zero_driver() {
        let m = fm(50, 10);
        let st = RegressionState::for_market(&m);
        let sol = solve_bsde(&GeneratorSpec::zero(), &vec![2.5; 50], &m, &st, &BsdeConfig::default()).unwrap();
        assert!(sol.y.iter().all(|v| *v == 2.5));
        assert!(sol.z.iter().all(|v| *v == 0.0));
        assert!(sol.y0.exact);
    }

    #[test]
    fn linear_integral_of_one() {
        let m = fm(20, 8);
        let st = RegressionState::for_market(&m);
        let z = PathField::zeros(8, 20, 1);
        let ones = PathField::filled(8, 20, 1, 1.0);
        let sol = solve_linear_bsde(&z, &z, &ones, &vec![0.0; 20], &m, &st, &BsdeConfig::default()).unwrap();
        assert!((sol.y0.value - 1.0).abs() < 1e-14);
        assert!(sol.y0.exact);
    }

    #[test]
    fn mismatched_comparison_is_rejected() {
        let a = fm(20, 4);
        let b = fm(20, 5);
        let cfg = BsdeConfig::default();
        let s1 = solve_bsde(&GeneratorSpec::zero(), &vec![0.0; 20], &a, &RegressionState::for_market(&a), &cfg).unwrap();
        let s2 = solve_bsde(&GeneratorSpec::zero(), &vec![0.0; 20], &b, &RegressionState::for_market(&b), &cfg).unwrap();
        assert!(comparison_check(&s1, &s2, 1e-3, 1e-3).is_err());
    }
}
