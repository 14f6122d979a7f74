//! Analytic expected-statistics model of the asymmetric MP-QKD experiment.
//!
//! Every round, Alice and Bob each send a phase-randomized coherent pulse
//! with an intensity drawn from `{μ, ν, o}`. Charlie interferes them and
//! announces which of two threshold detectors clicked. Exactly one click
//! is an effective detection. Effective detections are paired with the
//! next one within `l` rounds, and each pair is sorted into a Z-pair
//! (key/decoy), an X-pair (phase test) or discarded according to the
//! intensities of its two rounds.
//!
//! All counts here are real-valued expectations over `N` rounds.

use core::f64::consts::PI;

use crate::math;
use crate::primitives::{bessel_i0m1, transmittance, ChannelConfig, Transmittances};
use crate::stats::SecurityBudget;
use crate::{Error, Result};

/// Intensity class of a pulse (or of a pair, for the aggregate label).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Level {
    Signal,
    Decoy,
    Vacuum,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Signal, Level::Decoy, Level::Vacuum];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            Level::Signal => "mu",
            Level::Decoy => "nu",
            Level::Vacuum => "o",
        }
    }
}

/// The twelve source parameters: intensities and sending probabilities
/// of both parties.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ParameterVector {
    pub mu_a: f64,
    pub nu_a: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub o_a: f64,
    pub p_mu_a: f64,
    pub p_nu_a: f64,
    pub p_o_a: f64,
    pub mu_b: f64,
    pub nu_b: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub o_b: f64,
    pub p_mu_b: f64,
    pub p_nu_b: f64,
    pub p_o_b: f64,
}

impl ParameterVector {
    /// Builds a vector from the eight free parameters; the vacuum intensity
    /// is zero and the vacuum probability closes each simplex.
    #[allow(clippy::too_many_arguments)]
    pub fn from_free(
        mu_a: f64,
        nu_a: f64,
        p_mu_a: f64,
        p_nu_a: f64,
        mu_b: f64,
        nu_b: f64,
        p_mu_b: f64,
        p_nu_b: f64,
    ) -> Self {
        Self {
            mu_a,
            nu_a,
            o_a: 0.0,
            p_mu_a,
            p_nu_a,
            p_o_a: 1.0 - p_mu_a - p_nu_a,
            mu_b,
            nu_b,
            o_b: 0.0,
            p_mu_b,
            p_nu_b,
            p_o_b: 1.0 - p_mu_b - p_nu_b,
        }
    }

    /// Same settings for both parties.
    pub fn symmetric(mu: f64, nu: f64, p_mu: f64, p_nu: f64) -> Self {
        Self::from_free(mu, nu, p_mu, p_nu, mu, nu, p_mu, p_nu)
    }

    /// Free coordinates `(μa, νa, pμa, pνa, μb, νb, pμb, pνb)`.
    pub fn free(&self) -> [f64; 8] {
        [
            self.mu_a,
            self.nu_a,
            self.p_mu_a,
            self.p_nu_a,
            self.mu_b,
            self.nu_b,
            self.p_mu_b,
            self.p_nu_b,
        ]
    }

    pub fn intensity_a(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.mu_a,
            Level::Decoy => self.nu_a,
            Level::Vacuum => self.o_a,
        }
    }

    pub fn intensity_b(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.mu_b,
            Level::Decoy => self.nu_b,
            Level::Vacuum => self.o_b,
        }
    }

    pub fn prob_a(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.p_mu_a,
            Level::Decoy => self.p_nu_a,
            Level::Vacuum => self.p_o_a,
        }
    }

    pub fn prob_b(&self, level: Level) -> f64 {
        match level {
            Level::Signal => self.p_mu_b,
            Level::Decoy => self.p_nu_b,
            Level::Vacuum => self.p_o_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.o_a != 0.0 || self.o_b != 0.0 {
            return Err(Error::InvalidParameters(
                "vacuum intensities o_a, o_b must be 0",
            ));
        }
        let all = [
            self.mu_a,
            self.nu_a,
            self.p_mu_a,
            self.p_nu_a,
            self.p_o_a,
            self.mu_b,
            self.nu_b,
            self.p_mu_b,
            self.p_nu_b,
            self.p_o_b,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("all parameters must be finite"));
        }
        if !(self.nu_a > 0.0) {
            return Err(Error::InvalidParameters("nu_a must be > o_a = 0"));
        }
        if !(self.nu_a < self.mu_a) {
            return Err(Error::InvalidParameters("nu_a must be < mu_a"));
        }
        if !(self.mu_a < 1.0) {
            return Err(Error::InvalidParameters("mu_a must be < 1"));
        }
        if !(self.nu_b > 0.0) {
            return Err(Error::InvalidParameters("nu_b must be > o_b = 0"));
        }
        if !(self.nu_b < self.mu_b) {
            return Err(Error::InvalidParameters("nu_b must be < mu_b"));
        }
        if !(self.mu_b < 1.0) {
            return Err(Error::InvalidParameters("mu_b must be < 1"));
        }
        let probs = [
            self.p_mu_a,
            self.p_nu_a,
            self.p_o_a,
            self.p_mu_b,
            self.p_nu_b,
            self.p_o_b,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameters(
                "every probability must lie in [0, 1]",
            ));
        }
        if (self.p_mu_a + self.p_nu_a + self.p_o_a - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters(
                "p_mu_a + p_nu_a + p_o_a must equal 1",
            ));
        }
        if (self.p_mu_b + self.p_nu_b + self.p_o_b - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters(
                "p_mu_b + p_nu_b + p_o_b must equal 1",
            ));
        }
        Ok(())
    }
}

/// Protocol-level settings shared by the analytic model, the estimator and
/// the Monte Carlo oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ProtocolConfig {
    /// Total number of rounds (pulses) `N`.
    pub pulses: f64,
    /// Maximum pairing interval `l` in rounds.
    pub pairing_interval: u32,
    /// Half-width of the phase-sifting window (radians).
    pub delta_phase: f64,
    /// Number of discrete modulation phases.
    pub phase_slices: u32,
    pub e_d_x: f64,
    pub e_d_z: f64,
    /// Error-correction efficiency `f`.
    pub ec_efficiency: f64,
    pub budget: SecurityBudget,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            pulses: 1e13,
            pairing_interval: 2000,
            delta_phase: PI / 16.0,
            phase_slices: 16,
            e_d_x: 0.1,
            e_d_z: 1e-6,
            ec_efficiency: 1.1,
            budget: SecurityBudget::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulses >= 1.0 && self.pulses.is_finite()) {
            return Err(Error::InvalidProtocol("N must be >= 1"));
        }
        if self.pairing_interval < 1 {
            return Err(Error::InvalidProtocol("pairing interval l must be >= 1"));
        }
        if !(self.delta_phase > 0.0 && self.delta_phase <= PI / 2.0) {
            return Err(Error::InvalidProtocol("delta_phase must lie in (0, pi/2]"));
        }
        if self.phase_slices < 2 {
            return Err(Error::InvalidProtocol("phase_slices must be >= 2"));
        }
        if !(0.0..=0.5).contains(&self.e_d_x) {
            return Err(Error::InvalidProtocol("e_d_x must lie in [0, 0.5]"));
        }
        if !(0.0..=0.5).contains(&self.e_d_z) {
            return Err(Error::InvalidProtocol("e_d_z must lie in [0, 0.5]"));
        }
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            return Err(Error::InvalidProtocol(
                "error-correction efficiency f must be >= 1",
            ));
        }
        self.budget.validate()
    }

    /// Probability that an X-pair survives phase sifting, `2Δ/π`.
    pub fn sifting_factor(&self) -> f64 {
        2.0 * self.delta_phase / PI
    }
}

/// Expected (or observed) statistics of one intensity combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Entry {
    /// Effective-detection pair count `n`.
    pub count: f64,
    /// Error count `t`.
    pub errors: f64,
    /// Pair-number normalizer `N_(ka,kb)`, so that `count / norm` is the
    /// detection-conditioned gain.
    pub norm: f64,
}

impl Entry {
    pub fn gain(&self) -> f64 {
        self.count / self.norm
    }
}

/// Counts for every Z-pair and X-pair intensity combination.
///
/// Both grids are indexed by `[alice level][bob level]`. For X-pairs a
/// non-vacuum level stands for the doubled aggregate intensity (`2μ`, `2ν`):
/// both rounds of the pair used the same intensity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservedStats {
    pub z: [[Entry; 3]; 3],
    pub x: [[Entry; 3]; 3],
    /// Total number of pairs formed.
    pub pairs: f64,
    /// Per-round effective-detection probability `p`.
    pub response: f64,
}

impl ObservedStats {
    #[inline]
    pub fn z(&self, a: Level, b: Level) -> &Entry {
        &self.z[a.index()][b.index()]
    }

    #[inline]
    pub fn x(&self, a: Level, b: Level) -> &Entry {
        &self.x[a.index()][b.index()]
    }

    /// Checks `0 <= t <= n` and finiteness for every entry. The upper
    /// bound `n <= N` is left out because the normalizer is a trial count,
    /// not a pulse count.
    pub fn is_consistent(&self) -> bool {
        self.z.iter().chain(self.x.iter()).flatten().all(|e| {
            e.count.is_finite()
                && e.errors.is_finite()
                && e.norm.is_finite()
                && e.errors >= 0.0
                && e.errors <= e.count * (1.0 + 1e-12)
                && e.norm >= 0.0
        })
    }
}

/// `(1 - p_d) e^{-s}` together with its complement, computed without
/// cancellation.
#[inline]
fn no_click_pair(s: f64, p_d: f64) -> (f64, f64) {
    let e = math::exp(-s);
    let y = (1.0 - p_d) * e;
    let u = -math::expm1(-s) + p_d * e;
    (y, u)
}

#[inline]
fn interference_terms(k_a: f64, k_b: f64, t: &Transmittances, p_d: f64) -> (f64, f64, f64) {
    let s = (k_a * t.eta_a + k_b * t.eta_b) / 2.0;
    let x = math::sqrt(t.eta_a * k_a * t.eta_b * k_b);
    let (y, u) = no_click_pair(s, p_d);
    (y, u, x)
}

/// Probability of an effective detection (exactly one detector clicks) in a
/// round where Alice sends `k_a` and Bob sends `k_b`:
/// `q = 2y(I₀(x) - y)`.
pub fn response_prob(k_a: f64, k_b: f64, t: &Transmittances, p_d: f64) -> f64 {
    let (y, u, x) = interference_terms(k_a, k_b, t, p_d);
    2.0 * y * (bessel_i0m1(x) + u)
}

/// Response probabilities for every pair of levels, `[alice][bob]`.
pub fn response_table(g: &ParameterVector, t: &Transmittances, p_d: f64) -> [[f64; 3]; 3] {
    let mut q = [[0.0; 3]; 3];
    for a in Level::ALL {
        for b in Level::ALL {
            q[a.index()][b.index()] = response_prob(g.intensity_a(a), g.intensity_b(b), t, p_d);
        }
    }
    q
}

/// Average effective-detection probability per round.
pub fn avg_response_prob(g: &ParameterVector, t: &Transmittances, p_d: f64) -> f64 {
    let q = response_table(g, t, p_d);
    let mut p = 0.0;
    for a in Level::ALL {
        for b in Level::ALL {
            p += g.prob_a(a) * g.prob_b(b) * q[a.index()][b.index()];
        }
    }
    p
}

/// Expected number of pairs formed per round, `p·a / (1 + a)` with
/// `a = 1 - (1-p)^l`.
///
/// This is the reciprocal of the mean number of rounds consumed per pair
/// (wait for a click, then wait for a partner within `l` rounds,
/// restarting from the late click when none arrives).
pub fn pairs_per_round(p: f64, l: u32) -> f64 {
    if !(p > 0.0) {
        return 0.0;
    }
    let p = p.min(1.0);
    let a = if p >= 1.0 {
        1.0
    } else {
        -math::expm1(f64::from(l) * math::ln1p(-p))
    };
    p * a / (1.0 + a)
}

/// Slot assignments `(round i, round j)` a party may use to produce a Z-pair
/// aggregate `level`.
fn z_slots(level: Level) -> &'static [(Level, Level)] {
    match level {
        Level::Signal => &[
            (Level::Signal, Level::Vacuum),
            (Level::Vacuum, Level::Signal),
        ],
        Level::Decoy => &[(Level::Decoy, Level::Vacuum), (Level::Vacuum, Level::Decoy)],
        Level::Vacuum => &[(Level::Vacuum, Level::Vacuum)],
    }
}

/// Intensity-assignment weights `Σ p p p p` of every combination, the
/// normalizers before multiplication by `pairs / p²`. X-pairs where both
/// parties use the X basis carry the sifting factor.
pub fn pair_weights(g: &ParameterVector, proto: &ProtocolConfig) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let mut z = [[0.0; 3]; 3];
    let mut x = [[0.0; 3]; 3];
    let sift = proto.sifting_factor();
    for a in Level::ALL {
        for b in Level::ALL {
            let mut w = 0.0;
            for &(ai, aj) in z_slots(a) {
                for &(bi, bj) in z_slots(b) {
                    w += g.prob_a(ai) * g.prob_a(aj) * g.prob_b(bi) * g.prob_b(bj);
                }
            }
            z[a.index()][b.index()] = w;
            let pa = g.prob_a(a);
            let pb = g.prob_b(b);
            let w = pa * pa * pb * pb;
            let both_x = a != Level::Vacuum && b != Level::Vacuum;
            x[a.index()][b.index()] = if both_x { sift * w } else { w };
        }
    }
    (z, x)
}

/// Two-round detection brackets of an X-pair whose parties both used the X
/// basis: `(count, errors)` per sifted intensity assignment, i.e.
///
/// ```text
/// count  = 4y⁴ - 8y³I₀(x) + 2y²[I₀(x√(2-2cosΔ)) + I₀(x√(2+2cosΔ))]
/// errors = 2y⁴ - 4y³I₀(x) + 2y²I₀(x√(2-2cosΔ))
/// ```
///
/// rewritten in terms of `1 - y` and `I₀ - 1` so the leading orders cancel
/// exactly.
pub fn x_pair_brackets(y: f64, u: f64, x: f64, delta: f64) -> (f64, f64) {
    let c = math::cos(delta);
    let j_x = bessel_i0m1(x);
    let j_minus = bessel_i0m1(x * math::sqrt(2.0 - 2.0 * c));
    let j_plus = bessel_i0m1(x * math::sqrt(2.0 + 2.0 * c));
    let y2 = y * y;
    let count = 4.0 * y2 * u * u - 8.0 * y2 * y * j_x + 2.0 * y2 * (j_minus + j_plus);
    let errors = 2.0 * y2 * u * u - 4.0 * y2 * y * j_x + 2.0 * y2 * j_minus;
    (count.max(0.0), errors.max(0.0))
}

#[inline]
fn misalign(n: f64, t0: f64, e_d: f64) -> f64 {
    (1.0 - e_d) * t0 + e_d * (n - t0)
}

/// Expected statistics of an `N`-round experiment.
pub fn expected_statistics(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
) -> Result<ObservedStats> {
    g.validate()?;
    cfg.validate()?;
    proto.validate()?;
    let t = transmittance(cfg);
    expected_statistics_at(g, &t, cfg.dark_count, proto)
}

/// [`expected_statistics`] for given transmittances, without validation.
pub fn expected_statistics_at(
    g: &ParameterVector,
    t: &Transmittances,
    p_d: f64,
    proto: &ProtocolConfig,
) -> Result<ObservedStats> {
    let q = response_table(g, t, p_d);
    let mut p = 0.0;
    for a in Level::ALL {
        for b in Level::ALL {
            p += g.prob_a(a) * g.prob_b(b) * q[a.index()][b.index()];
        }
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    let pairs = proto.pulses * pairs_per_round(p, proto.pairing_interval);
    let scale = pairs / (p * p);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    let qv = |a: Level, b: Level| q[a.index()][b.index()];
    let (wz, wx) = pair_weights(g, proto);
    let mut out = ObservedStats {
        pairs,
        response: p,
        ..Default::default()
    };

    for a in Level::ALL {
        for b in Level::ALL {
            let mut n = 0.0;
            let mut t0 = 0.0;
            for &(ai, aj) in z_slots(a) {
                for &(bi, bj) in z_slots(b) {
                    let w = g.prob_a(ai) * g.prob_a(aj) * g.prob_b(bi) * g.prob_b(bj);
                    let term = w * qv(ai, bi) * qv(aj, bj);
                    n += term;
                    // Bit error: both parties left the same round empty.
                    let same_empty = (ai == Level::Vacuum && bi == Level::Vacuum)
                        || (aj == Level::Vacuum && bj == Level::Vacuum);
                    if same_empty {
                        t0 += term;
                    }
                }
            }
            n *= scale;
            t0 = if a == Level::Vacuum || b == Level::Vacuum {
                n / 2.0
            } else {
                t0 * scale
            };
            out.z[a.index()][b.index()] = Entry {
                count: n,
                errors: misalign(n, t0, proto.e_d_z),
                norm: scale * wz[a.index()][b.index()],
            };
        }
    }

    let sift = proto.sifting_factor();
    for a in Level::ALL {
        for b in Level::ALL {
            let pa = g.prob_a(a);
            let pb = g.prob_b(b);
            let w = pa * pa * pb * pb;
            let (n, t0) = if a != Level::Vacuum && b != Level::Vacuum {
                let (y, u, x) = interference_terms(g.intensity_a(a), g.intensity_b(b), t, p_d);
                let (count, errors) = x_pair_brackets(y, u, x, proto.delta_phase);
                (scale * sift * w * count, scale * sift * w * errors)
            } else {
                let qq = qv(a, b);
                let n = scale * w * qq * qq;
                (n, n / 2.0)
            };
            out.x[a.index()][b.index()] = Entry {
                count: n,
                errors: misalign(n, t0, proto.e_d_x),
                norm: scale * wx[a.index()][b.index()],
            };
        }
    }
    Ok(out)
}
