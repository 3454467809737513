//! Fenchel–Legendre transform of concave drivers and the duality relation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::search::compass_minimize;
use crate::error::{invalid, Result};
use crate::generator::{norm, DriverKind, GeneratorSpec};
use crate::scalar::Scalar;

/// A value in `ℝ ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal<S> {
    Finite(S),
    PosInfinity,
}

impl<S: Scalar> ExtReal<S> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<S> {
        match self {
            ExtReal::Finite(v) => Some(*v),
            ExtReal::PosInfinity => None,
        }
    }

    /// Maps `+∞` to the float infinity.
    pub fn to_scalar(&self) -> S {
        self.finite().unwrap_or_else(S::infinity)
    }
}

impl<S: fmt::Display> fmt::Display for ExtReal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

/// Tuning of the numerical transform used for custom drivers.
#[derive(Debug, Clone, Copy)]
pub struct FenchelOptions<S> {
    /// Half-width `R` of the `(y, z)` search box.
    pub radius: S,
    pub tol: S,
    pub max_evals: usize,
}

impl<S: Scalar> Default for FenchelOptions<S> {
    fn default() -> Self {
        Self {
            radius: S::lit(100.0),
            tol: S::lit(1e-9),
            max_evals: 20_000,
        }
    }
}

#[inline]
fn close<S: Scalar>(a: S, b: S) -> bool {
    (a - b).abs() <= S::lit(1e-12) * S::one().max(b.abs())
}

/// `F(t, β, γ) = sup_{y,z} [f(t, y, z) − yβ − z'γ]`.
pub fn fenchel_transform<S: Scalar>(
    gen: &GeneratorSpec<S>,
    t: S,
    beta: S,
    gamma: &[S],
    mu_hat: &[S],
) -> Result<ExtReal<S>> {
    fenchel_transform_with(gen, t, beta, gamma, mu_hat, &FenchelOptions::default())
}

pub fn fenchel_transform_with<S: Scalar>(
    gen: &GeneratorSpec<S>,
    t: S,
    beta: S,
    gamma: &[S],
    mu_hat: &[S],
    opts: &FenchelOptions<S>,
) -> Result<ExtReal<S>> {
    if !gen.is_concave {
        return invalid(format!("driver {} is not concave", gen.label()));
    }
    let zero = S::zero();
    Ok(match &gen.kind {
        DriverKind::Zero => {
            if beta == zero && gamma.iter().all(|g| *g == zero) {
                ExtReal::Finite(zero)
            } else {
                ExtReal::PosInfinity
            }
        }
        DriverKind::Linear { beta: b0, gamma: g0 } => {
            if close(beta, *b0) && gamma.len() == g0.len() && gamma.iter().zip(g0).all(|(a, b)| close(*a, *b)) {
                ExtReal::Finite(zero)
            } else {
                ExtReal::PosInfinity
            }
        }
        DriverKind::KIgnorance { k } => {
            if beta == zero && norm(gamma) <= *k * (S::one() + S::lit(1e-12)) {
                ExtReal::Finite(zero)
            } else {
                ExtReal::PosInfinity
            }
        }
        DriverKind::LogAuxiliary { k } => {
            let g = gamma[0];
            if beta == zero && g.abs() <= *k * (S::one() + S::lit(1e-12)) {
                let s = mu_hat[0] + g;
                ExtReal::Finite(s * s)
            } else {
                ExtReal::PosInfinity
            }
        }
        DriverKind::Custom { .. } => numerical_transform(gen, t, beta, gamma, mu_hat, opts),
    })
}

/// Concave maximization on `[−R, R]^{1+d}` and `[−2R, 2R]^{1+d}`: a finite
/// transform has the same supremum on both boxes; a linearly growing
/// objective does not.
fn numerical_transform<S: Scalar>(
    gen: &GeneratorSpec<S>,
    t: S,
    beta: S,
    gamma: &[S],
    mu_hat: &[S],
    opts: &FenchelOptions<S>,
) -> ExtReal<S> {
    let d = gamma.len();
    let objective = |v: &[S]| {
        let (y, z) = (v[0], &v[1..]);
        let mut s = gen.eval(t, y, z, mu_hat) - y * beta;
        for j in 0..d {
            s -= z[j] * gamma[j];
        }
        -s
    };
    let x0 = vec![S::zero(); d + 1];
    let r = opts.radius;
    let inner = compass_minimize(objective, &x0, -r, r, r / S::lit(4.0), opts.tol, opts.max_evals);
    let two_r = r * S::lit(2.0);
    let outer = compass_minimize(objective, &inner.x, -two_r, two_r, r / S::lit(4.0), opts.tol, opts.max_evals);
    let (sup_inner, sup_outer) = (-inner.value, -outer.value);
    if sup_outer - sup_inner > S::lit(1e-6) * (S::one() + sup_inner.abs()) {
        ExtReal::PosInfinity
    } else {
        ExtReal::Finite(sup_outer)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityGapReport {
    pub max_gap: f64,
    pub grid_spacing: f64,
    pub probes: usize,
}

/// Compares `f(t, y, z)` with `inf [F + yβ + z'γ]` over a discretized
/// effective domain of `F` at random probes. One-dimensional `z`.
pub fn duality_relation_check<S: Scalar>(
    gen: &GeneratorSpec<S>,
    n_probes: usize,
    grid_points: usize,
    seed: u64,
) -> Result<DualityGapReport> {
    if grid_points < 2 {
        return invalid("duality check needs at least two grid points");
    }
    let candidates: Vec<(S, S)> = match &gen.kind {
        DriverKind::Zero => vec![(S::zero(), S::zero())],
        DriverKind::Linear { beta, gamma } => {
            if gamma.len() != 1 {
                return invalid("duality check is one-dimensional");
            }
            vec![(*beta, gamma[0])]
        }
        DriverKind::KIgnorance { k } | DriverKind::LogAuxiliary { k } => (0..grid_points)
            .map(|i| {
                let g = -*k + S::lit(2.0) * *k * S::from_usize_lossy(i) / S::from_usize_lossy(grid_points - 1);
                (S::zero(), g)
            })
            .collect(),
        DriverKind::Custom { .. } => return invalid("duality check needs an analytic transform"),
    };
    let spacing = match &gen.kind {
        DriverKind::KIgnorance { k } | DriverKind::LogAuxiliary { k } => {
            (S::lit(2.0) * *k / S::from_usize_lossy(grid_points - 1)).as_f64()
        }
        _ => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for _ in 0..n_probes {
        let t = S::lit(rng.random_range(0.0..1.0));
        let y = S::lit(rng.random_range(-2.0..2.0));
        let z = [S::lit(rng.random_range(-2.0..2.0))];
        let mu = [S::lit(rng.random_range(-0.5..0.5))];
        let mut best = S::infinity();
        for &(b, g) in &candidates {
            if let ExtReal::Finite(f) = fenchel_transform(gen, t, b, &[g], &mu)? {
                best = best.min(f + y * b + z[0] * g);
            }
        }
        max_gap = max_gap.max((best - gen.eval(t, y, &z, &mu)).abs().as_f64());
    }
    Ok(DualityGapReport {
        max_gap,
        grid_spacing: spacing,
        probes: n_probes,
    })
}
