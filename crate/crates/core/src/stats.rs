//! Monte Carlo estimates and small sample statistics.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point estimate with its standard error. `exact` marks values that carry
/// no sampling error (closed forms, deterministic reductions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<S> {
    pub value: S,
    pub stderr: S,
    pub exact: bool,
}

impl<S: Scalar> Estimate<S> {
    pub fn exact(value: S) -> Self {
        Self {
            value,
            stderr: S::zero(),
            exact: true,
        }
    }

    pub fn sampled(value: S, stderr: S) -> Self {
        Self {
            value,
            stderr,
            exact: false,
        }
    }

    /// Sample mean and standard error of the mean; exact when every sample
    /// is the same number.
    pub fn from_samples(xs: &[S]) -> Self {
        if let Some(first) = xs.first() {
            if xs.iter().all(|x| x == first) {
                return Self::exact(*first);
            }
        }
        let (m, v) = mean_var(xs);
        let n = S::from_usize_lossy(xs.len().max(1));
        Self::sampled(m, (v / n).sqrt())
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_stderr(&self, other: &Self) -> S {
        (self.stderr * self.stderr + other.stderr * other.stderr).sqrt()
    }

    pub fn map<T: Scalar>(self, f: impl Fn(S) -> T) -> Estimate<T> {
        Estimate {
            value: f(self.value),
            stderr: f(self.stderr),
            exact: self.exact,
        }
    }
}

/// Sample mean and unbiased sample variance (Welford).
pub fn mean_var<S: Scalar>(xs: &[S]) -> (S, S) {
    let mut mean = S::zero();
    let mut m2 = S::zero();
    for (i, &x) in xs.iter().enumerate() {
        let n = S::from_usize_lossy(i + 1);
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    let var = if xs.len() > 1 {
        m2 / S::from_usize_lossy(xs.len() - 1)
    } else {
        S::zero()
    };
    (mean, var)
}

pub fn mean<S: Scalar>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    xs.iter().copied().sum::<S>() / S::from_usize_lossy(xs.len())
}

/// Sample skewness and excess kurtosis.
pub fn skew_kurtosis<S: Scalar>(xs: &[S]) -> (S, S) {
    let n = S::from_usize_lossy(xs.len());
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (S::zero(), S::zero(), S::zero());
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m3 / m2.powf(S::lit(1.5)), m4 / (m2 * m2) - S::lit(3.0))
}

/// Weighted mean `sum(w x) / sum(w)`; a constant sample returns the constant
/// itself so that expectations of deterministic quantities are exact.
pub fn weighted_mean<S: Scalar>(weights: &[S], xs: &[S]) -> S {
    if let Some(&first) = xs.first() {
        if xs.iter().all(|&x| x == first) {
            return first;
        }
    }
    let mut num = S::zero();
    let mut den = S::zero();
    for (&w, &x) in weights.iter().zip(xs) {
        num += w * x;
        den += w;
    }
    num / den
}
