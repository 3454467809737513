//! Utilities with inverse marginal utility and convex conjugate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    PositiveWealth,
    WholeLine,
}

pub type ScalarFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

#[derive(Clone)]
pub enum UtilityKind<S> {
    /// `u(x) = 1 − e^{−αx}` on the whole line.
    Cara { alpha: S },
    Log,
    /// `u(x) = x^p / p`, `p < 1`, `p ≠ 0`.
    Power { p: S },
    Custom {
        label: String,
        u: ScalarFn<S>,
        u_prime: ScalarFn<S>,
        inverse: ScalarFn<S>,
        conjugate: ScalarFn<S>,
        domain: Domain,
    },
}

impl<S: fmt::Debug> fmt::Debug for UtilityKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityKind::Cara { alpha } => f.debug_struct("Cara").field("alpha", alpha).finish(),
            UtilityKind::Log => write!(f, "Log"),
            UtilityKind::Power { p } => f.debug_struct("Power").field("p", p).finish(),
            UtilityKind::Custom { label, domain, .. } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("domain", domain)
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UtilitySpec<S> {
    pub kind: UtilityKind<S>,
}

impl<S: Scalar> UtilitySpec<S> {
    pub fn cara(alpha: S) -> Result<Self> {
        if !(alpha > S::zero()) || !alpha.is_finite() {
            return invalid(format!("CARA requires alpha > 0, got {alpha}"));
        }
        Ok(Self {
            kind: UtilityKind::Cara { alpha },
        })
    }

    pub fn log() -> Self {
        Self { kind: UtilityKind::Log }
    }

    pub fn power(p: S) -> Result<Self> {
        if !(p < S::one()) || p == S::zero() || !p.is_finite() {
            return invalid(format!("power utility requires p < 1 and p != 0, got {p}"));
        }
        Ok(Self {
            kind: UtilityKind::Power { p },
        })
    }

    pub fn custom(
        label: impl Into<String>,
        domain: Domain,
        u: impl Fn(S) -> S + Send + Sync + 'static,
        u_prime: impl Fn(S) -> S + Send + Sync + 'static,
        inverse: impl Fn(S) -> S + Send + Sync + 'static,
        conjugate: impl Fn(S) -> S + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: UtilityKind::Custom {
                label: label.into(),
                u: Arc::new(u),
                u_prime: Arc::new(u_prime),
                inverse: Arc::new(inverse),
                conjugate: Arc::new(conjugate),
                domain,
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            UtilityKind::Cara { .. } => "cara".into(),
            UtilityKind::Log => "log".into(),
            UtilityKind::Power { .. } => "power".into(),
            UtilityKind::Custom { label, .. } => label.clone(),
        }
    }

    pub fn domain(&self) -> Domain {
        match &self.kind {
            UtilityKind::Cara { .. } => Domain::WholeLine,
            UtilityKind::Custom { domain, .. } => *domain,
            _ => Domain::PositiveWealth,
        }
    }

    /// `u(x)`; `−∞` outside the domain.
    pub fn u(&self, x: S) -> S {
        if self.domain() == Domain::PositiveWealth && x < S::zero() {
            return S::neg_infinity();
        }
        match &self.kind {
            UtilityKind::Cara { alpha } => S::one() - (-*alpha * x).exp(),
            UtilityKind::Log => x.ln(),
            UtilityKind::Power { p } => x.powf(*p) / *p,
            UtilityKind::Custom { u, .. } => u(x),
        }
    }

    pub fn u_prime(&self, x: S) -> S {
        match &self.kind {
            UtilityKind::Cara { alpha } => *alpha * (-*alpha * x).exp(),
            UtilityKind::Log => x.recip(),
            UtilityKind::Power { p } => x.powf(*p - S::one()),
            UtilityKind::Custom { u_prime, .. } => u_prime(x),
        }
    }

    /// `I = (u')⁻¹`.
    pub fn inverse_marginal(&self, zeta: S) -> S {
        match &self.kind {
            UtilityKind::Cara { alpha } => -(zeta / *alpha).ln() / *alpha,
            UtilityKind::Log => zeta.recip(),
            UtilityKind::Power { p } => zeta.powf((*p - S::one()).recip()),
            UtilityKind::Custom { inverse, .. } => inverse(zeta),
        }
    }

    /// `ũ(ζ) = sup_x [u(x) − ζx] = u(I(ζ)) − ζI(ζ)`.
    pub fn conjugate(&self, zeta: S) -> S {
        match &self.kind {
            UtilityKind::Cara { alpha } => {
                let r = zeta / *alpha;
                S::one() - r + r * r.ln()
            }
            UtilityKind::Log => -zeta.ln() - S::one(),
            UtilityKind::Power { p } => (p.recip() - S::one()) * zeta.powf(*p / (*p - S::one())),
            UtilityKind::Custom { conjugate, .. } => conjugate(zeta),
        }
    }

    /// Largest relative deviation of `ũ(ζ)` from `u(I(ζ)) − ζI(ζ)` over
    /// the probes.
    pub fn conjugacy_gap(&self, probes: &[S]) -> S {
        probes.iter().fold(S::zero(), |m, &z| {
            let i = self.inverse_marginal(z);
            let direct = self.u(i) - z * i;
            let c = self.conjugate(z);
            m.max((c - direct).abs() / S::one().max(c.abs()))
        })
    }

    /// Largest relative deviation of the central difference of `ũ` (step
    /// `h·ζ`) from `−I`.
    pub fn derivative_gap(&self, probes: &[S], h: S) -> S {
        probes.iter().fold(S::zero(), |m, &z| {
            let step = h * z;
            let fd = (self.conjugate(z + step) - self.conjugate(z - step)) / (S::lit(2.0) * step);
            let i = self.inverse_marginal(z);
            m.max((fd + i).abs() / S::one().max(i.abs()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<f64> {
        (1..=40).map(|i| 0.05 * i as f64).collect()
    }

    #[test]
    fn conjugates_are_consistent() {
        for u in [
            UtilitySpec::cara(1.0).unwrap(),
            UtilitySpec::cara(2.5).unwrap(),
            UtilitySpec::log(),
            UtilitySpec::power(0.5).unwrap(),
            UtilitySpec::power(-1.0).unwrap(),
        ] {
            assert!(u.conjugacy_gap(&probes()) < 1e-10, "{}", u.label());
            assert!(u.derivative_gap(&probes(), 1e-4) < 1e-6, "{}", u.label());
        }
    }

    #[test]
    fn inverse_is_decreasing_and_inverts() {
        let u = UtilitySpec::power(0.3).unwrap();
        let p = probes();
        for w in p.windows(2) {
            assert!(u.inverse_marginal(w[1]) < u.inverse_marginal(w[0]));
        }
        for z in p {
            assert!((u.u_prime(u.inverse_marginal(z)) - z).abs() < 1e-10 * z.max(1.0));
        }
    }

    #[test]
    fn inada_limits() {
        let u = UtilitySpec::log();
        assert!(u.u_prime(1e-300) > 1e299);
        assert!(u.u_prime(1e300) < 1e-299);
        let c = UtilitySpec::cara(1.0).unwrap();
        assert!(c.u_prime(-700.0) > 1e300);
        assert!(c.u_prime(700.0) < 1e-300);
    }

    #[test]
    fn bad_parameters() {
        assert!(UtilitySpec::cara(0.0f64).is_err());
        assert!(UtilitySpec::power(1.0f64).is_err());
        assert!(UtilitySpec::power(0.0f64).is_err());
    }

    #[test]
    fn log_is_minus_infinity_below_zero() {
        assert_eq!(UtilitySpec::<f64>::log().u(-1.0), f64::NEG_INFINITY);
    }
}
