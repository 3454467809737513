//! Adapted controls `(β, γ)` in the box `[−C, C]^{1+d}`.

use crate::error::{invalid, Result};
use crate::field::PathField;
use crate::filter::{girsanov_kernel, FilteredMarket, GirsanovKernel};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ControlProcess<S> {
    /// `β(t_k)`, `n_steps` slices, one component.
    pub beta: PathField<S>,
    /// `γ(t_k)`, `n_steps` slices, `d` components.
    pub gamma: PathField<S>,
    pub bound: S,
    /// Set when values at `t_k` are functions of the time-`t_k` state only.
    pub adapted: bool,
}

impl<S: Scalar> ControlProcess<S> {
    pub fn new(beta: PathField<S>, gamma: PathField<S>, bound: S) -> Result<Self> {
        if beta.n_times() != gamma.n_times() || beta.n_paths() != gamma.n_paths() || beta.dim() != 1 {
            return invalid("beta and gamma must share steps and paths; beta is scalar");
        }
        let c = Self {
            beta,
            gamma,
            bound,
            adapted: true,
        };
        if !c.within_box() {
            return invalid(format!("control leaves the box [-{bound}, {bound}]"));
        }
        Ok(c)
    }

    pub fn constant(n_steps: usize, n_paths: usize, beta: S, gamma: &[S], bound: S) -> Result<Self> {
        let d = gamma.len();
        let mut g = PathField::zeros(n_steps, n_paths, d);
        for k in 0..n_steps {
            for chunk in g.slice_mut(k).chunks_mut(d) {
                chunk.copy_from_slice(gamma);
            }
        }
        Self::new(PathField::filled(n_steps, n_paths, 1, beta), g, bound)
    }

    pub fn zero(n_steps: usize, n_paths: usize, d: usize, bound: S) -> Self {
        Self {
            beta: PathField::zeros(n_steps, n_paths, 1),
            gamma: PathField::zeros(n_steps, n_paths, d),
            bound,
            adapted: true,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.beta.n_times()
    }
    pub fn n_paths(&self) -> usize {
        self.beta.n_paths()
    }
    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    /// Box constraint, checked exactly.
    pub fn within_box(&self) -> bool {
        let b = self.bound;
        self.beta.iter().chain(self.gamma.iter()).all(|v| v.abs() <= b)
    }

    pub fn kernel(&self, fm: &FilteredMarket<S>) -> Result<GirsanovKernel<'_, S>> {
        girsanov_kernel(&self.beta, &self.gamma, &fm.w_hat, &fm.grid, self.bound)
    }

    /// True when every value is identical across paths at each step.
    pub fn is_path_independent(&self) -> bool {
        let same = |f: &PathField<S>| {
            (0..f.n_times()).all(|k| {
                let s = f.slice(k);
                let d = f.dim();
                s.chunks(d).all(|c| c == &s[..d])
            })
        };
        same(&self.beta) && same(&self.gamma)
    }

    pub fn max_abs_difference(&self, other: &Self) -> S {
        self.beta
            .iter()
            .zip(other.beta.iter())
            .chain(self.gamma.iter().zip(other.gamma.iter()))
            .fold(S::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    /// `log Z_γ(t_k) = log L̂(t_k) − log Γ_{0,t_k}`.
    pub fn log_density_ratio(&self, fm: &FilteredMarket<S>) -> Result<PathField<S>> {
        let kernel = self.kernel(fm)?;
        let (n, np) = (fm.n_steps(), fm.n_paths());
        let mut out = PathField::zeros(n + 1, np, 1);
        for k in 0..=n {
            for p in 0..np {
                out.set(k, p, 0, fm.log_l_hat.get(k, p, 0) - kernel.log_gamma_0t(k, p));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_enforced() {
        assert!(ControlProcess::constant(3, 2, 0.0, &[0.2], 0.1).is_err());
        let c = ControlProcess::constant(3, 2, 0.0, &[-0.1], 0.1).unwrap();
        assert!(c.within_box());
        assert!(c.is_path_independent());
    }
}
