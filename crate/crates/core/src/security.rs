//! Finite-key decoy-state estimator chain: single-photon yield, bit and
//! phase error rates, secure key length and key rate.

use core::fmt;

use crate::channel::{expected_statistics, Level, ObservedStats, ParameterVector, ProtocolConfig};
use crate::math;
use crate::primitives::{binary_entropy, poisson_coeff as a, ChannelConfig};
use crate::stats::{gamma_sampling, SecurityBudget};
use crate::Result;

use Level::{Decoy as Nu, Signal as Mu, Vacuum as O};

/// Why a key rate evaluated to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AbortReason {
    /// No detections at all.
    DegenerateChannel,
    /// The yield estimate has a non-positive denominator or is zero.
    DegenerateEstimator,
    /// The single-photon bit-error estimate exceeds 1/2.
    BitErrorAboveHalf,
    /// The phase-error bound reached 1/2.
    PhaseErrorSaturated,
    /// An intermediate quantity left its physical range.
    Unphysical(&'static str),
    /// Privacy amplification and error correction consume the whole key.
    NoKey,
}

impl AbortReason {
    pub fn describe(&self) -> &'static str {
        match self {
            AbortReason::DegenerateChannel => "degenerate channel: no effective detections",
            AbortReason::DegenerateEstimator => "degenerate estimator: single-photon yield is zero",
            AbortReason::BitErrorAboveHalf => "single-photon bit error rate exceeds 0.5",
            AbortReason::PhaseErrorSaturated => "phase error rate bound reached 0.5",
            AbortReason::Unphysical(what) => what,
            AbortReason::NoKey => "secure key length is not positive",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// All intermediate estimator outputs of one key-rate evaluation.
///
/// Fields after the abort point stay at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KeyRateBreakdown {
    pub y11_z: f64,
    pub m11_z: f64,
    pub m11_x: f64,
    pub e11_x_bit: f64,
    pub e11_z_ph: f64,
    /// Number of `(μa, μb)` Z-pairs.
    pub m_mumu: f64,
    /// Bit error rate of the `(μa, μb)` Z-pairs.
    pub e_mumu: f64,
    pub lambda_ec: f64,
    /// Secure key length (bits).
    pub key_length: f64,
    /// Secure key rate `2L/N` (bits per pulse).
    pub rate: f64,
    pub abort: Option<AbortReason>,
}

impl KeyRateBreakdown {
    fn aborted(mut self, reason: AbortReason) -> Self {
        self.key_length = 0.0;
        self.rate = 0.0;
        self.abort = Some(reason);
        self
    }
}

/// Lower bound on the yield of single-photon Z-pairs.
pub fn estimate_y11(
    stats: &ObservedStats,
    budget: &SecurityBudget,
    g: &ParameterVector,
) -> core::result::Result<f64, AbortReason> {
    let (mu_a, nu_a, mu_b, nu_b) = (g.mu_a, g.nu_a, g.mu_b, g.nu_b);
    let lo = |ka, kb| {
        let e = stats.z(ka, kb);
        budget.lower(e.count) / e.norm
    };
    let hi = |ka, kb| {
        let e = stats.z(ka, kb);
        budget.upper(e.count) / e.norm
    };
    let f_lower = a(1, mu_a) * a(2, mu_b) * lo(Nu, Nu)
        + a(1, nu_a) * a(2, nu_b) * a(0, mu_a) * lo(O, Mu)
        + a(1, nu_a) * a(2, nu_b) * a(0, mu_b) * lo(Mu, O)
        + (a(1, mu_a) * a(2, mu_b) * a(0, nu_a) * a(0, nu_b)
            - a(1, nu_a) * a(2, nu_b) * a(0, mu_a) * a(0, mu_b))
            * lo(O, O);
    let f_upper = a(1, nu_a) * a(2, nu_b) * hi(Mu, Mu)
        + a(1, mu_a) * a(2, mu_b) * a(0, nu_a) * hi(O, Nu)
        + a(1, mu_a) * a(2, mu_b) * a(0, nu_b) * hi(Nu, O);
    let denom = a(1, nu_a) * a(1, mu_a) * (a(1, nu_b) * a(2, mu_b) - a(1, mu_b) * a(2, nu_b));
    if !(denom > 0.0) {
        return Err(AbortReason::DegenerateEstimator);
    }
    let y11 = ((f_lower - f_upper) / denom).clamp(0.0, 1.0);
    if !(y11 > 0.0) {
        return Err(AbortReason::DegenerateEstimator);
    }
    Ok(y11)
}

/// Number of single-photon `(μa, μb)` Z-pairs.
pub fn compute_m11_z(y11: f64, stats: &ObservedStats, g: &ParameterVector) -> f64 {
    stats.z(Mu, Mu).norm * g.mu_a * g.mu_b * math::exp(-g.mu_a - g.mu_b) * y11
}

/// Number of single-photon `(2νa, 2νb)` X-pairs, built like
/// [`compute_m11_z`] with the Z-basis yield.
pub fn compute_m11_x(y11: f64, stats: &ObservedStats, g: &ParameterVector) -> f64 {
    stats.x(Nu, Nu).norm * a(1, 2.0 * g.nu_a) * a(1, 2.0 * g.nu_b) * y11
}

/// Upper bound on the single-photon bit error rate of X-pairs, clamped to
/// `[0, 0.5]`.
pub fn estimate_e11_bit(
    stats: &ObservedStats,
    y11: f64,
    budget: &SecurityBudget,
    g: &ParameterVector,
) -> core::result::Result<f64, AbortReason> {
    let a0a = a(0, 2.0 * g.nu_a);
    let b0b = a(0, 2.0 * g.nu_b);
    let hi = |ka, kb| {
        let e = stats.x(ka, kb);
        budget.upper(e.errors) / e.norm
    };
    let lo = |ka, kb| {
        let e = stats.x(ka, kb);
        budget.lower(e.errors) / e.norm
    };
    let t_upper = hi(Nu, Nu) + a0a * b0b * hi(O, O);
    let t_lower = a0a * lo(O, Nu) + b0b * lo(Nu, O);
    let e = (t_upper - t_lower) / (a(1, 2.0 * g.nu_a) * a(1, 2.0 * g.nu_b) * y11);
    if e > 0.5 || e.is_nan() {
        return Err(AbortReason::BitErrorAboveHalf);
    }
    Ok(e.max(0.0))
}

/// `min{e_bit + correction, 0.5}`; saturating at 1/2 aborts.
pub fn phase_error_bound(e_bit: f64, correction: f64) -> core::result::Result<f64, AbortReason> {
    let e = (e_bit + correction).min(0.5);
    if e >= 0.5 {
        return Err(AbortReason::PhaseErrorSaturated);
    }
    Ok(e)
}

/// Phase error rate of single-photon Z-pairs estimated from the X-pair
/// bit error rate plus the sampling-without-replacement correction.
pub fn phase_error_rate(
    e11_bit: f64,
    m11_x: f64,
    m11_z: f64,
    xi: f64,
) -> core::result::Result<f64, AbortReason> {
    let gamma = gamma_sampling(xi, e11_bit, m11_x, m11_z)
        .map_err(|_| AbortReason::Unphysical("single-photon pair counts must be positive"))?;
    phase_error_bound(e11_bit, gamma)
}

/// Inputs of the key-length formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLengthInputs {
    pub m11_z: f64,
    pub e11_z_ph: f64,
    pub m_mumu: f64,
    pub e_mumu: f64,
}

/// Error-correction leakage and secure key length (clamped at zero):
///
/// `L = M11[1 - h(e_ph)] - f·M_μμ·h(E_μμ) - log2(2/ε_cor) - 2·log2(1/ε_sec)`
pub fn key_length(inputs: &KeyLengthInputs, proto: &ProtocolConfig) -> Result<(f64, f64)> {
    let budget = &proto.budget;
    let lambda_ec = proto.ec_efficiency * inputs.m_mumu * binary_entropy(inputs.e_mumu)?;
    let length = inputs.m11_z * (1.0 - binary_entropy(inputs.e11_z_ph)?)
        - lambda_ec
        - math::log2(2.0 / budget.eps_cor)
        - 2.0 * math::log2(1.0 / budget.eps_sec);
    Ok((lambda_ec, length.max(0.0)))
}

/// Checks that counts, gains and error rates stay in their physical ranges:
/// every `n`, `t` positive, gains in `(0, 1)`.
fn check_counts(stats: &ObservedStats) -> core::result::Result<(), AbortReason> {
    for e in stats.z.iter().chain(stats.x.iter()).flatten() {
        // Zero is allowed: the vacuum-vacuum entries vanish exactly without
        // dark counts. Underflowed entries surface later as a degenerate
        // estimator or an empty key.
        if !(e.count >= 0.0) || !(e.errors >= 0.0) || e.errors > e.count {
            return Err(AbortReason::Unphysical(
                "pair and error counts must satisfy 0 <= t <= n",
            ));
        }
        let gain = if e.count > 0.0 { e.gain() } else { 0.0 };
        if !(0.0..1.0).contains(&gain) {
            return Err(AbortReason::Unphysical("every gain must lie in [0, 1)"));
        }
    }
    Ok(())
}

/// Runs the estimator chain on given statistics.
pub fn evaluate_stats(
    stats: &ObservedStats,
    g: &ParameterVector,
    proto: &ProtocolConfig,
) -> Result<KeyRateBreakdown> {
    let budget = &proto.budget;
    let mut out = KeyRateBreakdown::default();
    let mumu = stats.z(Mu, Mu);
    out.m_mumu = mumu.count;
    out.e_mumu = if mumu.count > 0.0 {
        mumu.errors / mumu.count
    } else {
        0.0
    };

    if let Err(r) = check_counts(stats) {
        return Ok(out.aborted(r));
    }
    let y11 = match estimate_y11(stats, budget, g) {
        Ok(v) => v,
        Err(r) => return Ok(out.aborted(r)),
    };
    out.y11_z = y11;
    if !(y11 < 1.0) {
        return Ok(out.aborted(AbortReason::Unphysical(
            "single-photon yield must lie in (0, 1)",
        )));
    }
    let pulse_gain = out.m_mumu / proto.pulses;
    if !(pulse_gain > 0.0 && pulse_gain < 1.0) {
        return Ok(out.aborted(AbortReason::Unphysical("M_mumu / N must lie in (0, 1)")));
    }
    out.m11_z = compute_m11_z(y11, stats, g);
    out.m11_x = compute_m11_x(y11, stats, g);
    let e_bit = match estimate_e11_bit(stats, y11, budget, g) {
        Ok(v) => v,
        Err(r) => return Ok(out.aborted(r)),
    };
    out.e11_x_bit = e_bit;
    let e_ph = if budget.finite_size {
        phase_error_rate(e_bit, out.m11_x, out.m11_z, budget.xi_ee)
    } else {
        phase_error_bound(e_bit, 0.0)
    };
    let e_ph = match e_ph {
        Ok(v) => v,
        Err(r) => return Ok(out.aborted(r)),
    };
    out.e11_z_ph = e_ph;
    if !(e_ph >= 0.0) {
        return Ok(out.aborted(AbortReason::Unphysical(
            "phase error rate must lie in [0, 0.5)",
        )));
    }
    if !(out.e_mumu >= 0.0 && out.e_mumu < 0.5) {
        return Ok(out.aborted(AbortReason::Unphysical("E_mumu must lie in [0, 0.5)")));
    }
    let inputs = KeyLengthInputs {
        m11_z: out.m11_z,
        e11_z_ph: e_ph,
        m_mumu: out.m_mumu,
        e_mumu: out.e_mumu,
    };
    let (lambda_ec, length) = key_length(&inputs, proto)?;
    out.lambda_ec = lambda_ec;
    out.key_length = length;
    out.rate = 2.0 * length / proto.pulses;
    if !(length > 0.0) {
        return Ok(out.aborted(AbortReason::NoKey));
    }
    Ok(out)
}

/// Secure key rate of a parameter vector on a channel.
///
/// Invalid inputs are errors. Every physical dead end (no detections,
/// saturated error rates, empty key) is a zero rate with
/// [`KeyRateBreakdown::abort`] set.
pub fn secure_key_rate(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
) -> Result<KeyRateBreakdown> {
    match expected_statistics(g, cfg, proto) {
        Ok(stats) => evaluate_stats(&stats, g, proto),
        Err(crate::Error::DegenerateChannel) => {
            Ok(KeyRateBreakdown::default().aborted(AbortReason::DegenerateChannel))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{expected_statistics, Level};
    use crate::primitives::{transmittance, Strategy};
    use crate::Error;
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    fn point_a() -> ParameterVector {
        ParameterVector::symmetric(0.424, 0.0213, 0.254, 0.180)
    }

    fn rate(g: &ParameterVector, cfg: &ChannelConfig, proto: &ProtocolConfig) -> f64 {
        secure_key_rate(g, cfg, proto).unwrap().rate
    }

    #[test]
    fn y11_matches_single_photon_pair_yield_without_fluctuations() {
        // With p_d = 0 one photon from each party gives a pair only if they
        // sit in different rounds (probability 1/2), and each photon then
        // clicks with its arm transmittance: y11 = ηa ηb / 2.
        let cfg = ChannelConfig {
            la_km: 50.0,
            lb_km: 50.0,
            dark_count: 0.0,
            ..Default::default()
        };
        let proto = ProtocolConfig {
            e_d_x: 0.0,
            e_d_z: 0.0,
            budget: SecurityBudget::default().asymptotic(),
            ..Default::default()
        };
        let g = point_a();
        let stats = expected_statistics(&g, &cfg, &proto).unwrap();
        let y11 = estimate_y11(&stats, &proto.budget, &g).unwrap();
        let t = transmittance(&cfg);
        let exact = t.eta_a * t.eta_b / 2.0;
        assert!(((y11 - exact) / exact).abs() < 0.05, "{y11} vs {exact}");
    }

    #[test]
    fn y11_tightens_with_more_pulses() {
        let g = point_a();
        let cfg = ChannelConfig::default();
        let p1 = ProtocolConfig::default();
        let p2 = ProtocolConfig { pulses: 2e13, ..p1 };
        let s1 = expected_statistics(&g, &cfg, &p1).unwrap();
        let s2 = expected_statistics(&g, &cfg, &p2).unwrap();
        let y1 = estimate_y11(&s1, &p1.budget, &g).unwrap();
        let y2 = estimate_y11(&s2, &p2.budget, &g).unwrap();
        assert!(y2 >= y1);
    }

    #[test]
    fn y11_rejects_reversed_decoy_ordering() {
        // Skip validation to reach the estimator with ν_b > μ_b.
        let g = ParameterVector {
            nu_b: 0.5,
            mu_b: 0.1,
            ..point_a()
        };
        let cfg = ChannelConfig::default();
        let proto = ProtocolConfig::default();
        let stats =
            crate::channel::expected_statistics_at(&g, &transmittance(&cfg), 1e-8, &proto).unwrap();
        assert_eq!(
            estimate_y11(&stats, &proto.budget, &g),
            Err(AbortReason::DegenerateEstimator)
        );
    }

    #[test]
    fn m11_z_definition() {
        let g = point_a();
        let stats =
            expected_statistics(&g, &ChannelConfig::default(), &ProtocolConfig::default()).unwrap();
        assert_eq!(compute_m11_z(0.0, &stats, &g), 0.0);
        let n = stats.z(Mu, Mu).norm;
        let m = compute_m11_z(1e-5, &stats, &g);
        assert!((m - n * 0.424 * 0.424 * libm::exp(-0.848) * 1e-5).abs() < 1e-9 * m);
    }

    #[test]
    fn e11_small_in_ideal_conditions_and_decreasing_in_n() {
        let g = point_a();
        let cfg = ChannelConfig {
            dark_count: 1e-8,
            ..Default::default()
        };
        let mut prev = f64::INFINITY;
        for &n in &[1e12, 1e13, 1e14] {
            let proto = ProtocolConfig {
                pulses: n,
                e_d_x: 0.0,
                e_d_z: 0.0,
                ..Default::default()
            };
            let stats = expected_statistics(&g, &cfg, &proto).unwrap();
            let y11 = estimate_y11(&stats, &proto.budget, &g).unwrap();
            let e = estimate_e11_bit(&stats, y11, &proto.budget, &g).unwrap();
            assert!(e < 0.2, "{e}");
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn e11_with_default_misalignment_stays_below_half() {
        let g = ParameterVector::symmetric(0.56, 0.0321, 0.278, 0.281);
        let cfg = ChannelConfig::from_total(200.0, 100.0, Strategy::ExtraAttenuation);
        let b = secure_key_rate(&g, &cfg, &ProtocolConfig::default()).unwrap();
        assert!(b.e11_x_bit > 0.1 && b.e11_x_bit < 0.5, "{}", b.e11_x_bit);
    }

    #[test]
    fn phase_error_rate_cases() {
        assert_eq!(phase_error_rate(0.0, 1e5, 1e6, 1e-10).unwrap(), 0.0);
        let big = phase_error_rate(0.05, 1e18, 1e18, 1e-10).unwrap();
        assert!((big - 0.05).abs() < 1e-6);
        let e = phase_error_rate(0.05, 1e5, 1e6, 1e-10).unwrap();
        assert!((e - (0.05 + 0.004_327_596_368_348_042)).abs() < 1e-12);
        assert_eq!(
            phase_error_rate(0.45, 10.0, 10.0, 1e-10),
            Err(AbortReason::PhaseErrorSaturated)
        );
    }

    #[test]
    fn key_length_clamps() {
        let proto = ProtocolConfig::default();
        let zero = KeyLengthInputs {
            m11_z: 0.0,
            e11_z_ph: 0.1,
            m_mumu: 1e6,
            e_mumu: 1e-5,
        };
        assert_eq!(key_length(&zero, &proto).unwrap().1, 0.0);
        let half = KeyLengthInputs {
            m11_z: 1e6,
            e11_z_ph: 0.5,
            m_mumu: 1e6,
            e_mumu: 1e-5,
        };
        assert_eq!(key_length(&half, &proto).unwrap().1, 0.0);
        let ok = KeyLengthInputs {
            m11_z: 1e8,
            e11_z_ph: 0.11,
            m_mumu: 1e8,
            e_mumu: 0.0,
        };
        let (lec, l) = key_length(&ok, &proto).unwrap();
        assert_eq!(lec, 0.0);
        let expect =
            1e8 * (1.0 - 0.499_915_958_164_527_995_6) - libm::log2(2e10) - 2.0 * libm::log2(1e10);
        assert!((l - expect).abs() < 1e-6);
    }

    #[test]
    fn chain_reports_rate_and_breakdown() {
        let g = point_a();
        let proto = ProtocolConfig::default();
        let b = secure_key_rate(&g, &ChannelConfig::default(), &proto).unwrap();
        assert!(b.abort.is_none());
        assert_eq!(b.rate, 2.0 * b.key_length / proto.pulses);
        assert!(b.y11_z > 0.0 && b.y11_z < 1.0);
        assert!(b.e11_z_ph >= b.e11_x_bit && b.e11_z_ph < 0.5);
        assert!(b.m11_x > 0.0 && b.m11_x <= b.m11_z);
    }

    #[test]
    fn invalid_vector_is_an_error_not_zero_rate() {
        let g = ParameterVector {
            nu_a: 0.6,
            ..point_a()
        };
        assert_eq!(
            secure_key_rate(&g, &ChannelConfig::default(), &ProtocolConfig::default()),
            Err(Error::InvalidParameters("nu_a must be < mu_a"))
        );
    }

    #[test]
    fn noiseless_detectors_are_physical() {
        // Without dark counts the vacuum-vacuum pairs vanish exactly.
        let quiet = ChannelConfig {
            dark_count: 0.0,
            ..Default::default()
        };
        let b = secure_key_rate(&point_a(), &quiet, &ProtocolConfig::default()).unwrap();
        assert_eq!(b.abort, None);
        let noisy = secure_key_rate(
            &point_a(),
            &ChannelConfig::default(),
            &ProtocolConfig::default(),
        );
        assert!(b.rate >= noisy.unwrap().rate);
    }

    #[test]
    fn unphysical_points_give_zero_rate_with_reason() {
        // Fully misaligned Z basis.
        let proto = ProtocolConfig {
            e_d_z: 0.5,
            ..Default::default()
        };
        let b = secure_key_rate(&point_a(), &ChannelConfig::default(), &proto).unwrap();
        assert_eq!(b.rate, 0.0);
        assert!(matches!(b.abort, Some(AbortReason::Unphysical(_))));
        // Far too long for this vector.
        let cfg = ChannelConfig {
            la_km: 400.0,
            lb_km: 400.0,
            ..Default::default()
        };
        let b = secure_key_rate(&point_a(), &cfg, &ProtocolConfig::default()).unwrap();
        assert_eq!(b.rate, 0.0);
        assert!(b.abort.is_some());
    }

    #[test]
    fn fluctuations_only_cost_key() {
        let g = point_a();
        let cfg = ChannelConfig::default();
        let finite = ProtocolConfig::default();
        let asym = ProtocolConfig {
            budget: finite.budget.asymptotic(),
            ..finite
        };
        assert!(rate(&g, &cfg, &asym) >= rate(&g, &cfg, &finite));
    }

    #[test]
    fn rate_ordering_over_tabulated_points() {
        let proto = ProtocolConfig::default();
        let b =
            ParameterVector::from_free(0.216, 0.00449, 0.170, 0.229, 0.621, 0.0376, 0.305, 0.192);
        let c = ParameterVector::symmetric(0.492, 0.0258, 0.271, 0.220);
        let d =
            ParameterVector::from_free(0.107, 0.000624, 0.0902, 0.309, 0.718, 0.0549, 0.327, 0.230);
        let e = ParameterVector::symmetric(0.560, 0.0321, 0.278, 0.281);
        let r_a = rate(&point_a(), &ChannelConfig::default(), &proto);
        let r_b = rate(
            &b,
            &ChannelConfig::from_total(200.0, 50.0, Strategy::AsymmetricIntensity),
            &proto,
        );
        let r_c = rate(
            &c,
            &ChannelConfig::from_total(200.0, 50.0, Strategy::ExtraAttenuation),
            &proto,
        );
        let r_d = rate(
            &d,
            &ChannelConfig::from_total(200.0, 100.0, Strategy::AsymmetricIntensity),
            &proto,
        );
        let r_e = rate(
            &e,
            &ChannelConfig::from_total(200.0, 100.0, Strategy::ExtraAttenuation),
            &proto,
        );
        assert!(r_a > r_b && r_b > r_d);
        assert!(r_b > r_c);
        assert!(r_d > r_e);
    }

    fn feasible() -> impl proptest::strategy::Strategy<Value = ParameterVector> {
        let side = (0.05f64..0.8, 0.01f64..0.5, 0.05f64..0.5, 0.05f64..0.45);
        (side.clone(), side).prop_map(|((ma, fa, pma, pna), (mb, fb, pmb, pnb))| {
            ParameterVector::from_free(ma, ma * fa, pma, pna, mb, mb * fb, pmb, pnb)
        })
    }

    fn link() -> impl proptest::strategy::Strategy<Value = ChannelConfig> {
        let strategy = prop_oneof![
            Just(Strategy::Symmetric),
            Just(Strategy::AsymmetricIntensity),
            Just(Strategy::ExtraAttenuation),
        ];
        (0.0f64..300.0, 0.0f64..1.0, strategy).prop_map(|(total, frac, strategy)| {
            let delta = match strategy {
                Strategy::Symmetric => 0.0,
                _ => total * frac,
            };
            ChannelConfig::from_total(total, delta, strategy)
        })
    }

    fn no_higher(hi: f64, lo: f64) -> bool {
        hi <= lo * (1.0 + 1e-9) + 1e-300
    }

    proptest! {
        #[test]
        fn breakdown_stays_in_range(g in feasible(), cfg in link()) {
            let proto = ProtocolConfig::default();
            let b = secure_key_rate(&g, &cfg, &proto).unwrap();
            prop_assert!(b.rate >= 0.0 && b.rate.is_finite());
            prop_assert_eq!(b.rate, 2.0 * b.key_length / proto.pulses);
            if b.abort.is_none() {
                prop_assert!((0.0..=1.0).contains(&b.y11_z));
                prop_assert!((0.0..=0.5).contains(&b.e11_x_bit));
                prop_assert!((0.0..=0.5).contains(&b.e11_z_ph));
                let norm = expected_statistics(&g, &cfg, &proto).unwrap().x(Level::Decoy, Level::Decoy).norm;
                prop_assert!(b.m11_x >= 0.0 && b.m11_x <= norm);
            }
        }

        #[test]
        fn misalignment_never_helps(g in feasible(), cfg in link(), lo in 0.0f64..0.25, step in 0.0f64..0.25, z_basis in any::<bool>()) {
            let base = ProtocolConfig::default();
            let (a, b) = if z_basis {
                (ProtocolConfig { e_d_z: lo, ..base }, ProtocolConfig { e_d_z: lo + step, ..base })
            } else {
                (ProtocolConfig { e_d_x: lo, ..base }, ProtocolConfig { e_d_x: lo + step, ..base })
            };
            prop_assert!(no_higher(rate(&g, &cfg, &b), rate(&g, &cfg, &a)));
        }

        #[test]
        fn dark_counts_never_help(g in feasible(), cfg in link(), lo in 0.0f64..1e-6, step in 0.0f64..1e-6) {
            let proto = ProtocolConfig::default();
            let hi_cfg = ChannelConfig { dark_count: lo + step, ..cfg };
            let lo_cfg = ChannelConfig { dark_count: lo, ..cfg };
            prop_assert!(no_higher(rate(&g, &hi_cfg, &proto), rate(&g, &lo_cfg, &proto)));
        }

        #[test]
        fn finite_size_never_helps(g in feasible(), cfg in link()) {
            let finite = ProtocolConfig::default();
            let asym = ProtocolConfig { budget: finite.budget.asymptotic(), ..finite };
            prop_assert!(no_higher(rate(&g, &cfg, &finite), rate(&g, &cfg, &asym)));
        }
    }
}
