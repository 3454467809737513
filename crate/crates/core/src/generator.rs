//! BSDE drivers `f(t, y, z; state)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// `f(t, y, z, η̂)`, where `η̂ = σ⁻¹μ̂` is the filter state.
pub type DriverFn<S> = Arc<dyn Fn(S, S, &[S], &[S]) -> S + Send + Sync>;
/// Writes `f_Z` into the slice and returns `f_Y`.
pub type PartialsFn<S> = Arc<dyn Fn(S, S, &[S], &[S], &mut [S]) -> S + Send + Sync>;

#[derive(Clone)]
pub enum DriverKind<S> {
    Zero,
    /// `f = βy + γ'z`.
    Linear { beta: S, gamma: Vec<S> },
    /// `f = −K‖z‖`.
    KIgnorance { k: S },
    /// Driver of the auxiliary BSDE for logarithmic utility under
    /// K-ignorance: `inf_{|γ|≤K} (μ̂ + γ)² + γz`. One-dimensional.
    LogAuxiliary { k: S },
    Custom {
        label: String,
        f: DriverFn<S>,
        partials: Option<PartialsFn<S>>,
    },
}

impl<S: fmt::Debug> fmt::Debug for DriverKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverKind::Zero => write!(f, "Zero"),
            DriverKind::Linear { beta, gamma } => f
                .debug_struct("Linear")
                .field("beta", beta)
                .field("gamma", gamma)
                .finish(),
            DriverKind::KIgnorance { k } => f.debug_struct("KIgnorance").field("k", k).finish(),
            DriverKind::LogAuxiliary { k } => f.debug_struct("LogAuxiliary").field("k", k).finish(),
            DriverKind::Custom { label, partials, .. } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("has_partials", &partials.is_some())
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec<S> {
    pub kind: DriverKind<S>,
    pub lipschitz: S,
    pub is_concave: bool,
    pub is_smooth: bool,
}

impl<S: Scalar> GeneratorSpec<S> {
    pub fn zero() -> Self {
        Self {
            kind: DriverKind::Zero,
            lipschitz: S::zero(),
            is_concave: true,
            is_smooth: true,
        }
    }

    pub fn linear(beta: S, gamma: Vec<S>) -> Self {
        let g = gamma.iter().fold(S::zero(), |s, v| s + *v * *v).sqrt();
        Self {
            kind: DriverKind::Linear { beta, gamma },
            lipschitz: beta.abs().max(g),
            is_concave: true,
            is_smooth: true,
        }
    }

    /// `f = −r y` in dimension `d`.
    pub fn discount(r: S, d: usize) -> Self {
        Self::linear(-r, vec![S::zero(); d])
    }

    pub fn k_ignorance(k: S) -> Result<Self> {
        if !(k >= S::zero()) {
            return invalid(format!("K must satisfy K >= 0, got {k}"));
        }
        Ok(Self {
            kind: DriverKind::KIgnorance { k },
            lipschitz: k,
            is_concave: true,
            is_smooth: k == S::zero(),
        })
    }

    pub fn log_auxiliary(k: S) -> Result<Self> {
        if !(k >= S::zero()) {
            return invalid(format!("K must satisfy K >= 0, got {k}"));
        }
        Ok(Self {
            kind: DriverKind::LogAuxiliary { k },
            lipschitz: k,
            is_concave: true,
            is_smooth: false,
        })
    }

    /// A user driver. Smoothness is declared by supplying partials.
    pub fn custom(
        label: impl Into<String>,
        lipschitz: S,
        is_concave: bool,
        f: impl Fn(S, S, &[S], &[S]) -> S + Send + Sync + 'static,
        partials: Option<PartialsFn<S>>,
    ) -> Result<Self> {
        if !(lipschitz >= S::zero()) || !lipschitz.is_finite() {
            return invalid("Lipschitz constant must be finite and non-negative");
        }
        let is_smooth = partials.is_some();
        Ok(Self {
            kind: DriverKind::Custom {
                label: label.into(),
                f: Arc::new(f),
                partials,
            },
            lipschitz,
            is_concave,
            is_smooth,
        })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DriverKind::Zero => "zero".into(),
            DriverKind::Linear { .. } => "linear".into(),
            DriverKind::KIgnorance { .. } => "k-ignorance".into(),
            DriverKind::LogAuxiliary { .. } => "log-auxiliary".into(),
            DriverKind::Custom { label, .. } => label.clone(),
        }
    }

    /// Ambiguity level for the K-ignorance family.
    pub fn k(&self) -> Option<S> {
        match &self.kind {
            DriverKind::KIgnorance { k } | DriverKind::LogAuxiliary { k } => Some(*k),
            _ => None,
        }
    }

    /// `f(t, y, z)` given the filter state `μ̂(t)`.
    #[inline]
    pub fn eval(&self, t: S, y: S, z: &[S], mu_hat: &[S]) -> S {
        match &self.kind {
            DriverKind::Zero => S::zero(),
            DriverKind::Linear { beta, gamma } => {
                let mut v = *beta * y;
                for (g, zj) in gamma.iter().zip(z) {
                    v += *g * *zj;
                }
                v
            }
            DriverKind::KIgnorance { k } => -*k * norm(z),
            DriverKind::LogAuxiliary { k } => log_auxiliary_value(*k, mu_hat[0], z[0]),
            DriverKind::Custom { f, .. } => f(t, y, z, mu_hat),
        }
    }

    /// Writes `f_Z` into `fz` and returns `f_Y`; `None` when the driver is
    /// not smooth.
    pub fn partials(&self, t: S, y: S, z: &[S], mu_hat: &[S], fz: &mut [S]) -> Option<S> {
        match &self.kind {
            DriverKind::Zero => {
                fz.iter_mut().for_each(|v| *v = S::zero());
                Some(S::zero())
            }
            DriverKind::Linear { beta, gamma } => {
                fz.copy_from_slice(gamma);
                Some(*beta)
            }
            DriverKind::KIgnorance { k } if *k == S::zero() => {
                fz.iter_mut().for_each(|v| *v = S::zero());
                Some(S::zero())
            }
            DriverKind::Custom {
                partials: Some(p), ..
            } => Some(p(t, y, z, mu_hat, fz)),
            _ => None,
        }
    }

    /// Largest observed ratio `|Δf| / (|Δy| + ‖Δz‖)` over random probes in
    /// `[−scale, scale]`. Fails when it exceeds the declared constant.
    pub fn lipschitz_spot_check(&self, dim: usize, n_probes: usize, scale: S, seed: u64) -> Result<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| S::lit(rng.random_range(-1.0..1.0)) * scale;
        let mut worst = S::zero();
        let (mut z1, mut z2, mut mu) = (vec![S::zero(); dim], vec![S::zero(); dim], vec![S::zero(); dim]);
        for _ in 0..n_probes {
            let t = S::lit(rng.random_range(0.0..1.0));
            let (y1, y2) = (draw(&mut rng), draw(&mut rng));
            for j in 0..dim {
                z1[j] = draw(&mut rng);
                z2[j] = draw(&mut rng);
                mu[j] = draw(&mut rng);
            }
            let dz: Vec<S> = z1.iter().zip(&z2).map(|(a, b)| *a - *b).collect();
            let denom = (y1 - y2).abs() + norm(&dz);
            if denom > S::zero() {
                let r = (self.eval(t, y1, &z1, &mu) - self.eval(t, y2, &z2, &mu)).abs() / denom;
                worst = worst.max(r);
            }
        }
        if worst > self.lipschitz * (S::one() + S::lit(1e-6)) + S::lit(1e-12) {
            return invalid(format!(
                "driver {} exceeds its Lipschitz constant {}: observed {worst}",
                self.label(),
                self.lipschitz
            ));
        }
        Ok(worst)
    }
}

#[inline]
pub(crate) fn norm<S: Scalar>(z: &[S]) -> S {
    z.iter().fold(S::zero(), |s, v| s + *v * *v).sqrt()
}

/// Three-branch auxiliary driver, split at `z = −2μ̂ ± 2K`.
#[inline]
pub fn log_auxiliary_value<S: Scalar>(k: S, mu: S, z: S) -> S {
    let two = S::lit(2.0);
    if z > -two * mu + two * k {
        k * k - two * k * mu - k * z + mu * mu
    } else if z < -two * mu - two * k {
        k * k + two * k * mu + k * z + mu * mu
    } else {
        -z * z / S::lit(4.0) - mu * z
    }
}

/// Minimizing control of the auxiliary driver.
#[inline]
pub fn log_auxiliary_argmin<S: Scalar>(k: S, mu: S, z: S) -> S {
    let two = S::lit(2.0);
    if z > -two * mu + two * k {
        -k
    } else if z < -two * mu - two * k {
        k
    } else {
        -mu - z / two
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auxiliary_driver_is_continuous_at_the_branch_points() {
        for &(k, mu) in &[(0.1f64, 0.2), (0.3, -0.1), (0.0, 0.5)] {
            for b in [-2.0 * mu + 2.0 * k, -2.0 * mu - 2.0 * k] {
                let left = log_auxiliary_value(k, mu, b - 1e-9);
                let right = log_auxiliary_value(k, mu, b + 1e-9);
                assert!((left - right).abs() < 1e-8, "k={k} mu={mu} b={b}");
            }
        }
    }

    #[test]
    fn auxiliary_driver_is_the_infimum_over_the_box() {
        let (k, mu) = (0.1f64, 0.2);
        for i in 0..41 {
            let z = -1.0 + i as f64 * 0.05;
            let brute = (0..=2000)
                .map(|j| -k + 2.0 * k * j as f64 / 2000.0)
                .map(|g| (mu + g).powi(2) + g * z)
                .fold(f64::INFINITY, f64::min);
            assert!((brute - log_auxiliary_value(k, mu, z)).abs() < 1e-6);
            let g = log_auxiliary_argmin(k, mu, z);
            assert!(g.abs() <= k + 1e-15);
            assert!(((mu + g).powi(2) + g * z - log_auxiliary_value(k, mu, z)).abs() < 1e-12);
        }
    }

    #[test]
    fn declared_constants_hold() {
        for g in [
            GeneratorSpec::<f64>::zero(),
            GeneratorSpec::discount(0.05, 1),
            GeneratorSpec::k_ignorance(0.1).unwrap(),
            GeneratorSpec::log_auxiliary(0.1).unwrap(),
        ] {
            g.lipschitz_spot_check(1, 2000, 1.0, 3).unwrap();
        }
    }

    #[test]
    fn understated_constant_is_caught() {
        let g = GeneratorSpec::custom("steep", 0.5, true, |_, y, _, _| -2.0 * y, None).unwrap();
        assert!(g.lipschitz_spot_check(1, 200, 1.0, 1).is_err());
    }

    #[test]
    fn negative_k_is_rejected() {
        assert!(GeneratorSpec::<f64>::k_ignorance(-0.1).is_err());
    }
}
