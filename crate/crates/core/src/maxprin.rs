//! Terminal-perturbation maximum principle: adjoint processes and the
//! first-order condition on the optimal terminal wealth.

use serde::{Deserialize, Serialize};

use crate::bsde::BsdeSolution;
use crate::dual::UtilitySpec;
use crate::error::{invalid, Error, Result};
use crate::field::PathField;
use crate::filter::{accumulate_log_exponential, log_state_price_density, FilteredMarket};
use crate::generator::GeneratorSpec;
use crate::scalar::Scalar;
use crate::stats::mean_var;

#[derive(Debug, Clone)]
pub struct AdjointPaths<S> {
    /// `log m(t_k)`, `dm = −η̂' m dŴ`.
    pub log_m: PathField<S>,
    /// `log n(t_k)`, `dn = f_Y n dt + f_Z' n dŴ`.
    pub log_n: PathField<S>,
    pub f_y: PathField<S>,
    pub f_z: PathField<S>,
}

impl<S: Scalar> AdjointPaths<S> {
    #[inline]
    pub fn m(&self, k: usize, p: usize) -> S {
        self.log_m.get(k, p, 0).exp()
    }
    #[inline]
    pub fn n(&self, k: usize, p: usize) -> S {
        self.log_n.get(k, p, 0).exp()
    }
    pub fn n_steps(&self) -> usize {
        self.f_y.n_times()
    }
    pub fn n_paths(&self) -> usize {
        self.f_y.n_paths()
    }

    /// Multiplies `n` by a positive constant.
    pub fn scale_n(&mut self, c: S) -> Result<()> {
        if !(c > S::zero()) {
            return invalid("scale must be positive");
        }
        let lc = c.ln();
        let (t, np) = (self.log_n.n_times(), self.log_n.n_paths());
        for k in 0..t {
            for p in 0..np {
                let v = self.log_n.get(k, p, 0) + lc;
                self.log_n.set(k, p, 0, v);
            }
        }
        Ok(())
    }
}

/// Log-Euler integration of both adjoint equations along `(Y*, Z*)`.
pub fn adjoint_processes<S: Scalar>(
    gen: &GeneratorSpec<S>,
    opt: &BsdeSolution<S>,
    fm: &FilteredMarket<S>,
) -> Result<AdjointPaths<S>> {
    if !gen.is_smooth {
        return Err(Error::NotApplicable(format!(
            "driver {} is not continuously differentiable",
            gen.label()
        )));
    }
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    if opt.n_steps() != n || opt.n_paths() != np {
        return invalid("BSDE solution and market differ in shape");
    }
    let mut f_y = PathField::zeros(n, np, 1);
    let mut f_z = PathField::zeros(n, np, d);
    for k in 0..n {
        let t = fm.grid.time(k);
        for p in 0..np {
            let fy = gen
                .partials(t, opt.y.get(k, p, 0), opt.z.at(k, p), fm.eta_hat.at(k, p), f_z.at_mut(k, p))
                .ok_or_else(|| Error::InvalidArgument(format!("driver {} has no partials", gen.label())))?;
            f_y.set(k, p, 0, fy);
        }
    }
    let log_m = log_state_price_density(&fm.eta_hat, &fm.w_hat, &fm.grid)?;
    let half = S::lit(0.5);
    let log_n = accumulate_log_exponential(&fm.w_hat, fm.grid.dt(), |k, p, b| {
        let fz = f_z.at(k, p);
        let mut sq = S::zero();
        for j in 0..b.len() {
            b[j] = fz[j];
            sq += fz[j] * fz[j];
        }
        f_y.get(k, p, 0) - half * sq
    });
    Ok(AdjointPaths { log_m, log_n, f_y, f_z })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationarityStatus {
    Pass,
    Fail,
    /// Fitted `h₁ ≈ 0`: the abnormal case, not decidable by this test.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    pub interior: usize,
    pub boundary: usize,
    pub rho_mean: f64,
    /// Coefficient of variation of `ρ = m(T)/(u'(ξ*) n(T))` on the interior.
    pub cv: f64,
    pub h0: f64,
    pub h1: f64,
    /// `min (h₀ m(T) + h₁ u'(ξ*) n(T))` on the boundary set.
    pub boundary_min: Option<f64>,
    pub status: StationarityStatus,
}

/// First-order condition `h₀ m(T) + h₁ u'(ξ*) n(T) = 0` on `{ξ* > zero_tol}`
/// and `≥ 0` on its complement, with `(h₀, h₁)` fitted on the interior.
pub fn stationarity_check<S: Scalar>(
    xi_star: &[S],
    adj: &AdjointPaths<S>,
    util: &UtilitySpec<S>,
    zero_tol: S,
    cv_threshold: f64,
    slack: f64,
) -> Result<StationarityReport> {
    let (n, np) = (adj.n_steps(), adj.n_paths());
    if xi_star.len() != np {
        return invalid("terminal wealth has the wrong number of paths");
    }
    let mut rho = Vec::new();
    let (mut smm, mut sma, mut saa) = (0.0f64, 0.0f64, 0.0f64);
    let mut boundary = Vec::new();
    for (p, xi) in xi_star.iter().enumerate() {
        let m = adj.m(n, p).as_f64();
        let a = (util.u_prime(*xi) * adj.n(n, p)).as_f64();
        if *xi > zero_tol {
            rho.push(m / a);
            smm += m * m;
            sma += m * a;
            saa += a * a;
        } else {
            boundary.push((m, a));
        }
    }
    if rho.is_empty() {
        return Err(Error::Degenerate("no path has terminal wealth above the zero tolerance".into()));
    }
    let (rm, rv) = mean_var(&rho);
    let cv = if rho.len() > 1 { rv.max(0.0).sqrt() / rm.abs() } else { 0.0 };
    // smallest eigenvector of [[smm, sma], [sma, saa]]
    let tr = smm + saa;
    let det = smm * saa - sma * sma;
    let lam = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
    let (mut h0, mut h1) = if sma.abs() > 0.0 {
        (sma, lam - smm)
    } else if smm <= saa {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (h0 * h0 + h1 * h1).sqrt();
    h0 /= norm;
    h1 /= norm;
    if h1 < 0.0 {
        h0 = -h0;
        h1 = -h1;
    }
    let boundary_min = boundary
        .iter()
        .map(|(m, a)| h0 * m + h1 * a)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let status = if h1 <= 1e-8 {
        StationarityStatus::Inconclusive
    } else if cv <= cv_threshold && boundary_min.is_none_or(|b| b >= -slack) {
        StationarityStatus::Pass
    } else {
        StationarityStatus::Fail
    };
    Ok(StationarityReport {
        interior: rho.len(),
        boundary: boundary.len(),
        rho_mean: rm,
        cv,
        h0,
        h1,
        boundary_min,
        status,
    })
}
