//! Least-squares conditional expectations on a polynomial basis of the
//! Markov state, one fit per time step.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::field::PathField;
use crate::filter::{FilterKind, FilteredMarket};
use crate::linalg::DroppingCholesky;
use crate::scalar::Scalar;

/// Monomials with degree at most `per_coordinate` in each standardized
/// state coordinate and at most `total` overall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    pub per_coordinate: usize,
    pub total: usize,
}

impl Default for Basis {
    fn default() -> Self {
        Self {
            per_coordinate: 2,
            total: usize::MAX,
        }
    }
}

impl Basis {
    pub fn new(per_coordinate: usize, total: usize) -> Self {
        Self { per_coordinate, total }
    }

    /// Exponent vectors for `q` coordinates, constant first.
    pub fn exponents(&self, q: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for _ in 0..q {
            let mut next = Vec::new();
            for e in &out {
                for a in 0..=self.per_coordinate {
                    let mut v = e.clone();
                    v.push(a);
                    if v.iter().sum::<usize>() <= self.total {
                        next.push(v);
                    }
                }
            }
            out = next;
        }
        out.sort_by_key(|e| (e.iter().sum::<usize>(), std::cmp::Reverse(e.clone())));
        out
    }

    pub fn size(&self, q: usize) -> usize {
        self.exponents(q).len()
    }
}

struct Coordinate<'a, S: Clone> {
    field: Cow<'a, PathField<S>>,
    component: usize,
}

/// The per-step regressors: components of path fields indexed by time.
pub struct RegressionState<'a, S: Clone> {
    coords: Vec<Coordinate<'a, S>>,
}

impl<'a, S: Scalar> RegressionState<'a, S> {
    pub fn empty() -> Self {
        Self { coords: Vec::new() }
    }

    /// Markov coordinates of a filtered market: log-prices, plus `μ̂` when
    /// it is not an affine function of the log-prices.
    pub fn for_market(fm: &'a FilteredMarket<S>) -> Self {
        let mut s = Self::empty();
        for i in 0..fm.dim() {
            s = s.with_borrowed(&fm.log_prices, i);
        }
        if fm.kind == FilterKind::Kalman {
            for i in 0..fm.dim() {
                s = s.with_borrowed(&fm.mu_hat, i);
            }
        }
        s
    }

    pub fn with_borrowed(mut self, field: &'a PathField<S>, component: usize) -> Self {
        self.coords.push(Coordinate {
            field: Cow::Borrowed(field),
            component,
        });
        self
    }

    pub fn with_owned(mut self, field: PathField<S>, component: usize) -> Self {
        self.coords.push(Coordinate {
            field: Cow::Owned(field),
            component,
        });
        self
    }

    pub fn n_coordinates(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate values at step `k`, one vector per coordinate.
    pub fn values(&self, k: usize) -> Vec<Vec<S>> {
        self.coords.iter().map(|c| c.field.component(k, c.component)).collect()
    }

    pub(crate) fn check(&self, n_times: usize, n_paths: usize) -> Result<()> {
        for c in &self.coords {
            if c.field.n_times() < n_times || c.field.n_paths() != n_paths || c.component >= c.field.dim() {
                return Err(Error::InvalidArgument(
                    "regression coordinate does not cover the solution grid".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A fitted design for one time step; several targets share one
/// factorization.
pub struct StepFit<S> {
    design: Vec<S>,
    n_paths: usize,
    m: usize,
    chol: DroppingCholesky<S>,
}

impl<S: Scalar> StepFit<S> {
    /// Standardizes the coordinates, drops those with zero sample variance
    /// and factors the Gram matrix of the basis.
    pub fn fit(coords: &[Vec<S>], n_paths: usize, basis: Basis, rank_tol: S, step: usize) -> Result<Self> {
        if coords.iter().any(|c| c.len() != n_paths) {
            return Err(Error::InvalidArgument("coordinate length differs from path count".into()));
        }
        let mut standardized: Vec<Vec<S>> = Vec::new();
        for c in coords {
            let (mean, var) = crate::stats::mean_var(c);
            let sd = var.max(S::zero()).sqrt();
            if !(sd > S::lit(1e-12) * (S::one() + mean.abs())) {
                continue;
            }
            standardized.push(c.iter().map(|v| (*v - mean) / sd).collect());
        }
        let exps = basis.exponents(standardized.len());
        let m = exps.len();
        if n_paths < m {
            return Err(Error::Numerical {
                step,
                message: format!("{n_paths} paths cannot identify {m} basis functions"),
            });
        }
        let mut design = vec![S::zero(); n_paths * m];
        let mut powers = vec![S::one(); basis.per_coordinate + 1];
        for p in 0..n_paths {
            let row = &mut design[p * m..(p + 1) * m];
            for v in row.iter_mut() {
                *v = S::one();
            }
            for (q, c) in standardized.iter().enumerate() {
                for a in 1..=basis.per_coordinate {
                    powers[a] = powers[a - 1] * c[p];
                }
                for (b, e) in exps.iter().enumerate() {
                    if e[q] > 0 {
                        row[b] *= powers[e[q]];
                    }
                }
            }
        }
        let mut gram = vec![S::zero(); m * m];
        for row in design.chunks(m) {
            for a in 0..m {
                let ra = row[a];
                for b in a..m {
                    gram[a * m + b] += ra * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                gram[a * m + b] = gram[b * m + a];
            }
        }
        let chol = DroppingCholesky::factor(&gram, m, rank_tol);
        Ok(Self {
            design,
            n_paths,
            m,
            chol,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.chol.rank()
    }

    /// Least-squares coefficients for `target`.
    pub fn coefficients(&self, target: &[S]) -> Vec<S> {
        let m = self.m;
        let mut rhs = vec![S::zero(); m];
        for (row, t) in self.design.chunks(m).zip(target) {
            for a in 0..m {
                rhs[a] += row[a] * *t;
            }
        }
        self.chol.solve(&rhs)
    }

    /// Fitted values of `target` on the basis.
    pub fn project(&self, target: &[S]) -> Vec<S> {
        debug_assert_eq!(target.len(), self.n_paths);
        let c = self.coefficients(target);
        self.design
            .chunks(self.m)
            .map(|row| row.iter().zip(&c).fold(S::zero(), |s, (a, b)| s + *a * *b))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        let b = Basis::default();
        assert_eq!(b.size(0), 1);
        assert_eq!(b.size(1), 3);
        assert_eq!(b.size(2), 9);
        assert_eq!(Basis::new(2, 2).size(2), 6);
        assert_eq!(b.exponents(2)[0], vec![0, 0]);
    }

    #[test]
    fn constant_coordinates_reduce_to_the_mean() {
        let coords = vec![vec![3.0f64; 5]];
        let fit = StepFit::fit(&coords, 5, Basis::default(), 1e-10, 0).unwrap();
        assert_eq!(fit.basis_size(), 1);
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(fit.project(&y).iter().all(|v| (*v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn quadratic_target_is_reproduced() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v * v).collect();
        let fit = StepFit::fit(&[x], 50, Basis::default(), 1e-12, 0).unwrap();
        for (a, b) in fit.project(&y).iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_paths_is_a_numerical_error() {
        let coords = vec![vec![0.0f64, 1.0], vec![1.0, 0.5]];
        let err = StepFit::fit(&coords, 2, Basis::default(), 1e-10, 7).err().unwrap();
        assert!(matches!(err, Error::Numerical { step: 7, .. }));
    }

    #[test]
    fn collinear_coordinates_are_tolerated() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let fit = StepFit::fit(&[x, x2], 40, Basis::default(), 1e-10, 0).unwrap();
        assert!(fit.rank() < fit.basis_size());
        for (a, b) in fit.project(&y).iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
