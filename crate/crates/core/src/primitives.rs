//! Shared mathematical primitives and the fiber channel description.

use crate::math;
use crate::{Error, Result};

/// How the channel asymmetry between Alice and Bob is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Strategy {
    /// Both arms have the same length.
    Symmetric,
    /// Arms differ; each party tunes its own intensities and probabilities.
    AsymmetricIntensity,
    /// Arms differ; the short arm gets extra loss so both look like `L_B`.
    ExtraAttenuation,
}

impl Strategy {
    pub const fn name(self) -> &'static str {
        match self {
            Strategy::Symmetric => "symmetric",
            Strategy::AsymmetricIntensity => "asymmetric-intensity",
            Strategy::ExtraAttenuation => "extra-attenuation",
        }
    }
}

/// Arm lengths and device parameters of the untrusted-relay link.
///
/// By convention Alice holds the shorter arm: `la_km <= lb_km`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelConfig {
    /// Alice-Charlie fiber length (km).
    pub la_km: f64,
    /// Bob-Charlie fiber length (km).
    pub lb_km: f64,
    /// Fiber attenuation (dB/km).
    pub alpha_db_per_km: f64,
    /// Detector efficiency, folded into both arms.
    pub detector_efficiency: f64,
    /// Dark-count probability per pulse and detector.
    pub dark_count: f64,
    pub strategy: Strategy,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            la_km: 100.0,
            lb_km: 100.0,
            alpha_db_per_km: 0.2,
            detector_efficiency: 0.75,
            dark_count: 1e-8,
            strategy: Strategy::Symmetric,
        }
    }
}

impl ChannelConfig {
    /// Builds a channel from the total Alice-Bob distance and the arm
    /// length difference `L_B - L_A`.
    pub fn from_total(total_km: f64, delta_km: f64, strategy: Strategy) -> Self {
        Self {
            la_km: (total_km - delta_km) / 2.0,
            lb_km: (total_km + delta_km) / 2.0,
            strategy,
            ..Self::default()
        }
    }

    pub fn total_km(&self) -> f64 {
        self.la_km + self.lb_km
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.la_km >= 0.0 && self.la_km.is_finite()) {
            return Err(Error::InvalidChannel("L_A must be a finite length >= 0"));
        }
        if !(self.lb_km >= self.la_km && self.lb_km.is_finite()) {
            return Err(Error::InvalidChannel("L_B must be >= L_A"));
        }
        if !(self.alpha_db_per_km > 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(Error::InvalidChannel("alpha must be > 0"));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::InvalidChannel(
                "detector efficiency must lie in (0, 1]",
            ));
        }
        if !(self.dark_count >= 0.0 && self.dark_count < 1.0) {
            return Err(Error::InvalidChannel(
                "dark-count probability must lie in [0, 1)",
            ));
        }
        if self.strategy == Strategy::Symmetric && self.la_km != self.lb_km {
            return Err(Error::InvalidChannel(
                "symmetric strategy requires L_A == L_B",
            ));
        }
        Ok(())
    }
}

/// Per-arm transmittances including detector efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transmittances {
    pub eta_a: f64,
    pub eta_b: f64,
}

/// Binary Shannon entropy `h(x)` in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            what: "binary_entropy",
            value: x,
        });
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * math::log2(x) - (1.0 - x) * math::log2(1.0 - x))
}

/// Probability that a coherent pulse of mean photon number `k` carries
/// exactly `m` photons: `k^m e^{-k} / m!`.
pub fn poisson_coeff(m: u32, k: f64) -> f64 {
    let mut term = math::exp(-k);
    for i in 1..=m {
        term *= k / f64::from(i);
    }
    term
}

/// Fiber transmittance of both arms, `eta_d * 10^(-alpha L / 10)`.
///
/// Under [`Strategy::ExtraAttenuation`] the short arm is attenuated to
/// match the long one.
pub fn transmittance(cfg: &ChannelConfig) -> Transmittances {
    let la = match cfg.strategy {
        Strategy::ExtraAttenuation => cfg.lb_km,
        _ => cfg.la_km,
    };
    let arm = |l: f64| cfg.detector_efficiency * math::pow(10.0, -cfg.alpha_db_per_km * l / 10.0);
    Transmittances {
        eta_a: arm(la),
        eta_b: arm(cfg.lb_km),
    }
}

/// Repeaterless (PLOB) key-rate bound `-log2(1 - eta)` in bits per pulse.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Domain {
            what: "plob_bound",
            value: eta,
        });
    }
    Ok(-math::ln1p(-eta) / core::f64::consts::LN_2)
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    1.0 + bessel_i0m1(x)
}

/// `I₀(x) - 1`, summed without the leading one so small arguments keep
/// full relative precision.
///
/// Power series `Σ_{k≥1} (x²/4)^k / (k!)²`, truncated once the next term
/// drops below `1e-16` of the partial sum.
pub(crate) fn bessel_i0m1(x: f64) -> f64 {
    let q = x * x / 4.0;
    if q == 0.0 {
        return 0.0;
    }
    let mut term = q;
    let mut sum = q;
    let mut k = 1.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        if term < 1e-16 * sum {
            return sum;
        }
        sum += term;
    }
}
