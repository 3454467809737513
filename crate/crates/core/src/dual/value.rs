//! Dual and primal objective values along a control.

use std::collections::HashMap;

use super::control::ControlProcess;
use super::fenchel::{fenchel_transform_with, ExtReal, FenchelOptions};
use super::utility::UtilitySpec;
use crate::error::{invalid, Result};
use crate::filter::{FilteredMarket, GirsanovKernel};
use crate::generator::{DriverKind, GeneratorSpec};
use crate::scalar::Scalar;
use crate::stats::Estimate;

/// Evaluates `F` along controls, memoizing the numerical transform of
/// custom drivers.
pub(crate) struct FenchelEvaluator<'a, S> {
    gen: &'a GeneratorSpec<S>,
    opts: FenchelOptions<S>,
    cache: HashMap<Vec<u64>, ExtReal<S>>,
}

impl<'a, S: Scalar> FenchelEvaluator<'a, S> {
    pub(crate) fn new(gen: &'a GeneratorSpec<S>, opts: FenchelOptions<S>) -> Self {
        Self {
            gen,
            opts,
            cache: HashMap::new(),
        }
    }

    pub(crate) fn eval(&mut self, t: S, beta: S, gamma: &[S], mu_hat: &[S]) -> Result<ExtReal<S>> {
        if !matches!(self.gen.kind, DriverKind::Custom { .. }) {
            return fenchel_transform_with(self.gen, t, beta, gamma, mu_hat, &self.opts);
        }
        let key: Vec<u64> = std::iter::once(t)
            .chain(std::iter::once(beta))
            .chain(gamma.iter().copied())
            .chain(mu_hat.iter().copied())
            .map(|v| v.as_f64().to_bits())
            .collect();
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let v = fenchel_transform_with(self.gen, t, beta, gamma, mu_hat, &self.opts)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

/// Per-path `∫Γ_{0,s}F ds`, or `None` when `F = +∞` somewhere.
pub(crate) fn running_cost<S: Scalar>(
    control: &ControlProcess<S>,
    kernel: &GirsanovKernel<'_, S>,
    fm: &FilteredMarket<S>,
    gen: &GeneratorSpec<S>,
    opts: &FenchelOptions<S>,
) -> Result<Option<Vec<S>>> {
    let (n, np) = (fm.n_steps(), fm.n_paths());
    if control.n_steps() != n || control.n_paths() != np || control.dim() != fm.dim() {
        return invalid("control does not match the filtered market");
    }
    let dt = fm.grid.dt();
    let mut eval = FenchelEvaluator::new(gen, *opts);
    let mut out = vec![S::zero(); np];
    for k in 0..n {
        let t = fm.grid.time(k);
        for p in 0..np {
            match eval.eval(t, control.beta.get(k, p, 0), control.gamma.at(k, p), fm.eta_hat.at(k, p))? {
                ExtReal::PosInfinity => return Ok(None),
                ExtReal::Finite(f) => {
                    if f != S::zero() {
                        out[p] += kernel.gamma_0t(k, p) * f * dt;
                    }
                }
            }
        }
    }
    Ok(Some(out))
}

/// Pathwise `∫ΓF ds + Γ_{0,T} ũ(ζ L̂(T)/Γ_{0,T})`; `None` encodes `+∞`.
pub fn dual_value_samples<S: Scalar>(
    zeta: S,
    control: &ControlProcess<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &FenchelOptions<S>,
) -> Result<Option<Vec<S>>> {
    if !(zeta > S::zero()) {
        return invalid(format!("multiplier must be positive, got {zeta}"));
    }
    let kernel = control.kernel(fm)?;
    let Some(mut samples) = running_cost(control, &kernel, fm, gen, opts)? else {
        return Ok(None);
    };
    let n = fm.n_steps();
    for (p, s) in samples.iter_mut().enumerate() {
        let lg = kernel.log_gamma_0t(n, p);
        let ratio = zeta * (fm.log_l_hat.get(n, p, 0) - lg).exp();
        *s += lg.exp() * util.conjugate(ratio);
    }
    Ok(Some(samples))
}

/// `Ṽ(ζ; β, γ)` with its standard error, or `+∞`.
pub fn dual_value<S: Scalar>(
    zeta: S,
    control: &ControlProcess<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
) -> Result<Estimate<S>> {
    Ok(
        match dual_value_samples(zeta, control, fm, util, gen, &FenchelOptions::default())? {
            Some(s) => Estimate::from_samples(&s),
            None => Estimate::exact(S::infinity()),
        },
    )
}

/// Pathwise `∫ΓF ds + Γ_{0,T} u(ξ)`, an upper bound for the recursive
/// utility of `ξ` once averaged; `None` encodes `+∞`.
pub fn primal_value_samples<S: Scalar>(
    xi: &[S],
    control: &ControlProcess<S>,
    fm: &FilteredMarket<S>,
    util: &UtilitySpec<S>,
    gen: &GeneratorSpec<S>,
    opts: &FenchelOptions<S>,
) -> Result<Option<Vec<S>>> {
    if xi.len() != fm.n_paths() {
        return invalid("terminal wealth has the wrong number of paths");
    }
    let kernel = control.kernel(fm)?;
    let Some(mut samples) = running_cost(control, &kernel, fm, gen, opts)? else {
        return Ok(None);
    };
    let n = fm.n_steps();
    for (p, s) in samples.iter_mut().enumerate() {
        *s += kernel.gamma_0t(n, p) * util.u(xi[p]);
    }
    Ok(Some(samples))
}
