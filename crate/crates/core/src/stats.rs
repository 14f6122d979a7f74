//! Finite-size statistics: Chernoff bounds on expectations and the
//! random-sampling-without-replacement correction.

use core::f64::consts::PI;

use crate::math;
use crate::{Error, Result};

/// Failure probabilities of the finite-key analysis.
///
/// `finite_size = false` switches every statistical correction off (the
/// Chernoff bounds return the observed value and the sampling term is
/// zero). The `eps_cor`/`eps_sec` costs in the key length still apply.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SecurityBudget {
    pub eps_cor: f64,
    pub eps_sec: f64,
    /// Failure probability of each Chernoff bound.
    pub eps_cb: f64,
    /// Failure probability of the sampling-without-replacement bound.
    pub xi_ee: f64,
    pub finite_size: bool,
}

impl Default for SecurityBudget {
    fn default() -> Self {
        Self {
            eps_cor: 1e-10,
            eps_sec: 1e-10,
            eps_cb: 1e-10,
            xi_ee: 1e-10,
            finite_size: true,
        }
    }
}

impl SecurityBudget {
    /// Same budget with all statistical fluctuations disabled.
    pub fn asymptotic(self) -> Self {
        Self {
            finite_size: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.eps_cor) {
            return Err(Error::InvalidProtocol("eps_cor must lie in (0, 1)"));
        }
        if !open(self.eps_sec) {
            return Err(Error::InvalidProtocol("eps_sec must lie in (0, 1)"));
        }
        if !open(self.eps_cb) {
            return Err(Error::InvalidProtocol("eps_cb must lie in (0, 1)"));
        }
        if !open(self.xi_ee) {
            return Err(Error::InvalidProtocol("xi_ee must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Upper bound on the expectation of an observed count.
    pub fn upper(&self, chi: f64) -> f64 {
        if self.finite_size {
            chernoff_upper(chi, self.eps_cb)
        } else {
            chi
        }
    }

    /// Lower bound on the expectation of an observed count.
    pub fn lower(&self, chi: f64) -> f64 {
        if self.finite_size {
            chernoff_lower(chi, self.eps_cb)
        } else {
            chi
        }
    }
}

/// `chi + β + sqrt(2βchi + β²)` with `β = ln(1/eps)`.
pub fn chernoff_upper(chi: f64, eps: f64) -> f64 {
    let beta = -math::ln(eps);
    chi + beta + math::sqrt(2.0 * beta * chi + beta * beta)
}

/// `max{chi - β/2 - sqrt(2βchi + β²/4), 0}` with `β = ln(1/eps)`.
pub fn chernoff_lower(chi: f64, eps: f64) -> f64 {
    let beta = -math::ln(eps);
    let v = chi - beta / 2.0 - math::sqrt(2.0 * beta * chi + beta * beta / 4.0);
    v.max(0.0)
}

/// Deviation bound `Γ(a, b, c, d)` between an error rate `b` observed on a
/// random sample of size `c` and the rate on the complementary `d` items,
/// with failure probability `a`.
///
/// Returns 0 at `b ∈ {0, 1}` and when the logarithm's argument is `<= 1`
/// (the bound is vacuous there).
pub fn gamma_sampling(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain {
            what: "gamma_sampling: c",
            value: c,
        });
    }
    if !(d > 0.0) {
        return Err(Error::Domain {
            what: "gamma_sampling: d",
            value: d,
        });
    }
    if b <= 0.0 || b >= 1.0 {
        return Ok(0.0);
    }
    let spread = (1.0 - b) * b;
    let arg = (c + d) / (2.0 * PI * c * d * spread * a * a);
    if !(arg > 1.0) {
        return Ok(0.0);
    }
    Ok(math::sqrt((c + d) * spread / (c * d) * math::ln(arg)))
}
