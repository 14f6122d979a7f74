//! Round-level Monte Carlo simulation of the experiment, an independent
//! check of the analytic [`crate::channel`] model.
//!
//! Every round draws both intensities and modulation phases, interferes two
//! coherent states at Charlie and samples threshold-detector clicks. Rounds
//! with exactly one click are paired with the next such round at most `l`
//! rounds later, classified per party (Z, X, vacuum or discard), sifted and
//! tallied.
//!
//! The channel phase is uniform but constant within a shard: redrawing it
//! every round would decorrelate the two rounds of an X-pair and push the
//! X error rate to 1/2. Averaged over the modulation phases the single-round
//! click probability is the same either way.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    expected_statistics, pair_weights, pairs_per_round, Entry, Level, ObservedStats,
    ParameterVector, ProtocolConfig,
};
use crate::math;
use crate::primitives::{transmittance, ChannelConfig, Transmittances};
use crate::{Error, Result};

/// Outcome of one simulated round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDraw {
    pub k_a: Level,
    pub k_b: Level,
    /// Modulation phase slice indices in `0..phase_slices`.
    pub theta_a: u32,
    pub theta_b: u32,
    /// Channel phase in `[0, 2π)`.
    pub delta: f64,
    /// `(D_L, D_R)`.
    pub clicks: (bool, bool),
}

impl RoundDraw {
    /// Exactly one detector clicked.
    pub fn effective(&self) -> bool {
        self.clicks.0 ^ self.clicks.1
    }
}

fn draw_level<R: Rng>(rng: &mut R, p_signal: f64, p_decoy: f64) -> Level {
    let u: f64 = rng.gen();
    if u < p_signal {
        Level::Signal
    } else if u < p_signal + p_decoy {
        Level::Decoy
    } else {
        Level::Vacuum
    }
}

/// No-click probabilities of the two detectors for intensities `k_a`, `k_b`
/// and total phase `phi`.
fn no_click(k_a: f64, k_b: f64, t: &Transmittances, p_d: f64, phi: f64) -> (f64, f64) {
    let s = (t.eta_a * k_a + t.eta_b * k_b) / 2.0;
    let x = math::sqrt(t.eta_a * k_a * t.eta_b * k_b) * math::cos(phi);
    let base = 1.0 - p_d;
    (base * math::exp(-(s + x)), base * math::exp(-(s - x)))
}

/// Draws one round with a fresh uniform channel phase.
pub fn simulate_round<R: Rng>(
    g: &ParameterVector,
    t: &Transmittances,
    p_d: f64,
    phase_slices: u32,
    rng: &mut R,
) -> RoundDraw {
    let k_a = draw_level(rng, g.p_mu_a, g.p_nu_a);
    let k_b = draw_level(rng, g.p_mu_b, g.p_nu_b);
    let theta_a = rng.gen_range(0..phase_slices);
    let theta_b = rng.gen_range(0..phase_slices);
    let delta = rng.gen_range(0.0..2.0 * PI);
    let slice = 2.0 * PI / f64::from(phase_slices);
    let phi = delta + slice * (f64::from(theta_a) - f64::from(theta_b));
    let (nl, nr) = no_click(g.intensity_a(k_a), g.intensity_b(k_b), t, p_d, phi);
    let clicks = (rng.gen::<f64>() >= nl, rng.gen::<f64>() >= nr);
    RoundDraw {
        k_a,
        k_b,
        theta_a,
        theta_b,
        delta,
        clicks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OracleConfig {
    /// Total simulated rounds over all shards.
    pub rounds: u64,
    pub seed: u64,
    /// Independent shards; each draws its own channel phase.
    pub shards: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rounds: 100_000_000,
            seed: 0,
            shards: 64,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::InvalidProtocol("oracle rounds must be >= 1"));
        }
        if self.shards < 1 {
            return Err(Error::InvalidProtocol("oracle shards must be >= 1"));
        }
        Ok(())
    }

    pub fn shard_rounds(&self, shard: u32) -> u64 {
        let n = u64::from(self.shards);
        self.rounds / n + u64::from(u64::from(shard) < self.rounds % n)
    }
}

/// Integer tallies of a simulation; shards merge by addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tally {
    pub rounds: u64,
    /// Effective (single-click) detections.
    pub clicks: u64,
    pub double_clicks: u64,
    pub pairs: u64,
    pub z_count: [[u64; 3]; 3],
    pub z_errors: [[u64; 3]; 3],
    pub x_count: [[u64; 3]; 3],
    pub x_errors: [[u64; 3]; 3],
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        self.rounds += other.rounds;
        self.clicks += other.clicks;
        self.double_clicks += other.double_clicks;
        self.pairs += other.pairs;
        for a in 0..3 {
            for b in 0..3 {
                self.z_count[a][b] += other.z_count[a][b];
                self.z_errors[a][b] += other.z_errors[a][b];
                self.x_count[a][b] += other.x_count[a][b];
                self.x_errors[a][b] += other.x_errors[a][b];
            }
        }
    }

    /// Empirical statistics in the layout of the analytic model. Normalizers
    /// use the observed pair count and click frequency.
    pub fn observed(&self, g: &ParameterVector, proto: &ProtocolConfig) -> ObservedStats {
        let p = if self.rounds == 0 {
            0.0
        } else {
            self.clicks as f64 / self.rounds as f64
        };
        let pairs = self.pairs as f64;
        let scale = if p > 0.0 { pairs / (p * p) } else { 0.0 };
        let (wz, wx) = pair_weights(g, proto);
        let mut out = ObservedStats {
            pairs,
            response: p,
            ..Default::default()
        };
        for a in 0..3 {
            for b in 0..3 {
                out.z[a][b] = Entry {
                    count: self.z_count[a][b] as f64,
                    errors: self.z_errors[a][b] as f64,
                    norm: scale * wz[a][b],
                };
                out.x[a][b] = Entry {
                    count: self.x_count[a][b] as f64,
                    errors: self.x_errors[a][b] as f64,
                    norm: scale * wx[a][b],
                };
            }
        }
        out
    }
}

/// What one party's two rounds of a pair amount to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PartyBasis {
    /// One vacuum slot; `first` is true when the pulse was in round i.
    Z {
        level: Level,
        first: bool,
    },
    /// Same non-vacuum intensity in both rounds.
    X(Level),
    /// Vacuum in both rounds, usable in either basis.
    Zero,
    Discard,
}

fn classify(i: Level, j: Level) -> PartyBasis {
    match (i, j) {
        (Level::Vacuum, Level::Vacuum) => PartyBasis::Zero,
        (k, Level::Vacuum) => PartyBasis::Z {
            level: k,
            first: true,
        },
        (Level::Vacuum, k) => PartyBasis::Z {
            level: k,
            first: false,
        },
        (ki, kj) if ki == kj => PartyBasis::X(ki),
        _ => PartyBasis::Discard,
    }
}

/// Effective detection kept while waiting for its partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Click {
    pub round: u64,
    pub k_a: Level,
    pub k_b: Level,
    pub theta_a: u32,
    pub theta_b: u32,
    /// True when the right detector clicked.
    pub right: bool,
}

/// Streaming neighbor pairing: a click pairs with the next click at most
/// `l` rounds later, otherwise it is dropped and the later click waits in
/// its place.
#[derive(Debug, Clone)]
pub struct Pairer {
    interval: u64,
    open: Option<Click>,
}

impl Pairer {
    pub fn new(interval: u32) -> Self {
        Self {
            interval: u64::from(interval),
            open: None,
        }
    }

    pub fn push(&mut self, click: Click) -> Option<(Click, Click)> {
        match self.open.take() {
            Some(first) if click.round - first.round <= self.interval => Some((first, click)),
            _ => {
                self.open = Some(click);
                None
            }
        }
    }
}

/// Click probabilities for one shard, indexed by levels and the phase
/// slice difference `(θa - θb) mod M`.
#[derive(Debug, Clone)]
struct ClickTable {
    slices: u32,
    /// `(P(left only), P(exactly one), P(any))` cumulative thresholds.
    cells: Vec<(f64, f64, f64)>,
}

impl ClickTable {
    fn new(g: &ParameterVector, t: &Transmittances, p_d: f64, slices: u32, delta: f64) -> Self {
        let m = slices as usize;
        let mut cells = Vec::with_capacity(9 * m);
        for a in Level::ALL {
            for b in Level::ALL {
                for k in 0..slices {
                    let phi = delta + 2.0 * PI * f64::from(k) / f64::from(slices);
                    let (nl, nr) = no_click(g.intensity_a(a), g.intensity_b(b), t, p_d, phi);
                    let left = (1.0 - nl) * nr;
                    let right = (1.0 - nr) * nl;
                    let both = (1.0 - nl) * (1.0 - nr);
                    cells.push((left, left + right, left + right + both));
                }
            }
        }
        Self { slices, cells }
    }

    #[inline]
    fn get(&self, a: Level, b: Level, diff: u32) -> (f64, f64, f64) {
        let m = self.slices as usize;
        self.cells[(a.index() * 3 + b.index()) * m + diff as usize]
    }
}

struct PairSifter<'a> {
    proto: &'a ProtocolConfig,
    half: u32,
    slices: u32,
}

impl PairSifter<'_> {
    fn tally<R: Rng>(&self, i: &Click, j: &Click, rng: &mut R, out: &mut Tally) {
        let pa = classify(i.k_a, j.k_a);
        let pb = classify(i.k_b, j.k_b);
        let vac = Level::Vacuum.index();
        let flip = |e: f64, rng: &mut R| rng.gen::<f64>() < e;
        match (pa, pb) {
            (
                PartyBasis::Z {
                    level: a,
                    first: fa,
                },
                PartyBasis::Z {
                    level: b,
                    first: fb,
                },
            ) => {
                let (a, b) = (a.index(), b.index());
                out.z_count[a][b] += 1;
                // Correct outcomes put the two pulses in different rounds.
                let err = (fa == fb) ^ flip(self.proto.e_d_z, rng);
                out.z_errors[a][b] += u64::from(err);
            }
            (PartyBasis::Z { level: a, .. }, PartyBasis::Zero) => {
                out.z_count[a.index()][vac] += 1;
                out.z_errors[a.index()][vac] += u64::from(rng.gen::<bool>());
            }
            (PartyBasis::Zero, PartyBasis::Z { level: b, .. }) => {
                out.z_count[vac][b.index()] += 1;
                out.z_errors[vac][b.index()] += u64::from(rng.gen::<bool>());
            }
            (PartyBasis::X(a), PartyBasis::X(b)) => {
                let m = self.slices;
                let da = (j.theta_a + m - i.theta_a) % m;
                let db = (j.theta_b + m - i.theta_b) % m;
                if da % self.half != db % self.half {
                    return;
                }
                let (a, b) = (a.index(), b.index());
                out.x_count[a][b] += 1;
                let bits = (da >= self.half) ^ (db >= self.half);
                let parity = i.right ^ j.right;
                let err = bits ^ parity ^ flip(self.proto.e_d_x, rng);
                out.x_errors[a][b] += u64::from(err);
            }
            (PartyBasis::X(a), PartyBasis::Zero) => {
                out.x_count[a.index()][vac] += 1;
                out.x_errors[a.index()][vac] += u64::from(rng.gen::<bool>());
            }
            (PartyBasis::Zero, PartyBasis::X(b)) => {
                out.x_count[vac][b.index()] += 1;
                out.x_errors[vac][b.index()] += u64::from(rng.gen::<bool>());
            }
            (PartyBasis::Zero, PartyBasis::Zero) => {
                out.z_count[vac][vac] += 1;
                out.z_errors[vac][vac] += u64::from(rng.gen::<bool>());
                out.x_count[vac][vac] += 1;
                out.x_errors[vac][vac] += u64::from(rng.gen::<bool>());
            }
            _ => {}
        }
    }
}

fn check_inputs(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    oc: &OracleConfig,
) -> Result<()> {
    g.validate()?;
    cfg.validate()?;
    proto.validate()?;
    oc.validate()?;
    if proto.phase_slices % 2 != 0 {
        return Err(Error::InvalidProtocol(
            "the oracle needs an even number of phase slices",
        ));
    }
    Ok(())
}

/// Simulates shard `shard` of the experiment. Shards are independent and
/// deterministic in `(oc.seed, shard)`.
pub fn simulate_shard(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    oc: &OracleConfig,
    shard: u32,
) -> Result<Tally> {
    check_inputs(g, cfg, proto, oc)?;
    let t = transmittance(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(oc.seed);
    rng.set_stream(u64::from(shard));

    let m = proto.phase_slices;
    let delta = rng.gen_range(0.0..2.0 * PI);
    let table = ClickTable::new(g, &t, cfg.dark_count, m, delta);
    let sifter = PairSifter {
        proto,
        half: m / 2,
        slices: m,
    };
    let mut pairer = Pairer::new(proto.pairing_interval);
    let rounds = oc.shard_rounds(shard);
    let mut out = Tally {
        rounds,
        ..Default::default()
    };

    for round in 0..rounds {
        let k_a = draw_level(&mut rng, g.p_mu_a, g.p_nu_a);
        let k_b = draw_level(&mut rng, g.p_mu_b, g.p_nu_b);
        let theta_a = rng.gen_range(0..m);
        let theta_b = rng.gen_range(0..m);
        let (left, one, any) = table.get(k_a, k_b, (theta_a + m - theta_b) % m);
        let u: f64 = rng.gen();
        if u >= one {
            if u < any {
                out.double_clicks += 1;
            }
            continue;
        }
        out.clicks += 1;
        let click = Click {
            round,
            k_a,
            k_b,
            theta_a,
            theta_b,
            right: u >= left,
        };
        if let Some((i, j)) = pairer.push(click) {
            out.pairs += 1;
            sifter.tally(&i, &j, &mut rng, &mut out);
        }
    }
    Ok(out)
}

/// Runs all shards serially and merges their tallies.
pub fn simulate_experiment(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    oc: &OracleConfig,
) -> Result<Tally> {
    check_inputs(g, cfg, proto, oc)?;
    let mut total = Tally::default();
    for shard in 0..oc.shards {
        total.merge(&simulate_shard(g, cfg, proto, oc, shard)?);
    }
    Ok(total)
}

/// One empirical-versus-analytic comparison.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub label: String,
    pub empirical: f64,
    pub expected: f64,
    /// `(empirical - expected) / sqrt(max(expected, 1))`.
    pub z: f64,
}

impl Check {
    fn new(label: String, empirical: f64, expected: f64) -> Self {
        let z = (empirical - expected) / math::sqrt(expected.max(1.0));
        Self {
            label,
            empirical,
            expected,
            z,
        }
    }
}

/// Compares a tally with the analytic model evaluated at the simulated
/// number of rounds: total pairs, then count and errors of every Z and X
/// combination.
pub fn compare(
    tally: &Tally,
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
) -> Result<Vec<Check>> {
    let sim = ProtocolConfig {
        pulses: tally.rounds as f64,
        ..*proto
    };
    let expected = expected_statistics(g, cfg, &sim)?;
    let observed = tally.observed(g, proto);
    let mut checks = Vec::with_capacity(37);
    let rp = pairs_per_round(expected.response, proto.pairing_interval);
    checks.push(Check::new(
        String::from("pairs"),
        observed.pairs,
        tally.rounds as f64 * rp,
    ));
    for (basis, emp, ana) in [
        ("z", &observed.z, &expected.z),
        ("x", &observed.x, &expected.x),
    ] {
        for a in Level::ALL {
            for b in Level::ALL {
                let (ia, ib) = (a.index(), b.index());
                let name = format!("{basis}[{},{}]", a.symbol(), b.symbol());
                checks.push(Check::new(
                    format!("{name}.count"),
                    emp[ia][ib].count,
                    ana[ia][ib].count,
                ));
                checks.push(Check::new(
                    format!("{name}.errors"),
                    emp[ia][ib].errors,
                    ana[ia][ib].errors,
                ));
            }
        }
    }
    Ok(checks)
}
