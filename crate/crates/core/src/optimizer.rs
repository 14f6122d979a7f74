//! Modified particle swarm optimizer maximizing the secure key rate over
//! the source parameters.
//!
//! The twelve source parameters have eight degrees of freedom: vacuum
//! intensities are fixed at zero and each party's probabilities sum to one.
//! Particles live in the free coordinates
//! `(μa, νa, pμa, pνa, μb, νb, pμb, pνb)`. After every move they are
//! [`repair`]ed back onto the feasible set.
//!
//! Compared to textbook PSO the swarm
//! - decreases the inertia weight and both learning factors linearly,
//! - re-randomizes a fixed exploration subgroup every iteration,
//! - scores infeasible intermediate points (zero key rate) as fitness 0.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ParameterVector, ProtocolConfig};
use crate::math;
use crate::primitives::ChannelConfig;
use crate::security::{secure_key_rate, KeyRateBreakdown};
use crate::{Error, Result};

pub const FREE_DIMS: usize = 8;

/// Smallest intensity and probability a repaired vector may hold.
pub const FLOOR: f64 = 1e-6;

/// Box of every free coordinate; the velocity clamp is a fraction of each
/// dimension's width.
pub const BOUNDS: [(f64, f64); FREE_DIMS] = [
    (FLOOR, 1.0 - FLOOR),
    (FLOOR, 1.0 - FLOOR),
    (FLOOR, 1.0),
    (FLOOR, 1.0),
    (FLOOR, 1.0 - FLOOR),
    (FLOOR, 1.0 - FLOOR),
    (FLOOR, 1.0),
    (FLOOR, 1.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PsoConfig {
    pub n_particles: usize,
    pub max_iters: usize,
    pub w_init: f64,
    pub w_final: f64,
    pub c1_min: f64,
    pub c1_max: f64,
    pub c2_min: f64,
    pub c2_max: f64,
    /// Fraction of particles re-randomized every iteration.
    pub h: f64,
    /// Relative global-best improvement that resets the patience window.
    pub zeta: f64,
    /// Iterations without a `zeta` improvement before stopping.
    pub patience: usize,
    /// Velocity clamp as a fraction of each dimension's range.
    pub v_max_frac: f64,
    /// Resampling rounds used to start every particle at a positive rate.
    pub init_attempts: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            max_iters: 400,
            w_init: 0.9,
            w_final: 0.4,
            c1_min: 0.5,
            c1_max: 2.5,
            c2_min: 0.5,
            c2_max: 2.5,
            h: 0.1,
            zeta: 1e-4,
            patience: 50,
            v_max_frac: 0.2,
            init_attempts: 20,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidPso("n_particles must be >= 2"));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidPso("max_iters must be >= 1"));
        }
        if !(self.w_final > 0.0 && self.w_init >= self.w_final) {
            return Err(Error::InvalidPso(
                "inertia weights need w_init >= w_final > 0",
            ));
        }
        if !(self.c1_min > 0.0 && self.c1_max >= self.c1_min) {
            return Err(Error::InvalidPso(
                "learning factors need c1_max >= c1_min > 0",
            ));
        }
        if !(self.c2_min > 0.0 && self.c2_max >= self.c2_min) {
            return Err(Error::InvalidPso(
                "learning factors need c2_max >= c2_min > 0",
            ));
        }
        if !(0.0..1.0).contains(&self.h) {
            return Err(Error::InvalidPso("exploration ratio h must lie in [0, 1)"));
        }
        if !(self.zeta >= 0.0) {
            return Err(Error::InvalidPso("zeta must be >= 0"));
        }
        if !(self.v_max_frac > 0.0) {
            return Err(Error::InvalidPso("v_max_frac must be > 0"));
        }
        Ok(())
    }

    /// Size of the re-randomized subgroup, `⌊n·h⌋`.
    pub fn explorers(&self) -> usize {
        math::floor(self.n_particles as f64 * self.h) as usize
    }
}

/// Inertia weight at iteration `t`: `w_init - (w_init - w_final)·t/T`.
pub fn schedule_w(t: usize, cfg: &PsoConfig) -> f64 {
    cfg.w_init - (cfg.w_init - cfg.w_final) / cfg.max_iters as f64 * t as f64
}

/// Learning factor at iteration `t`: `c_min + (c_max - c_min)(1 - (t-1)/T)`.
pub fn schedule_c(t: usize, c_min: f64, c_max: f64, max_iters: usize) -> f64 {
    c_min + (c_max - c_min) * (1.0 - (t as f64 - 1.0) / max_iters as f64)
}

fn clip(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

fn repair_side(mu: f64, nu: f64, p_mu: f64, p_nu: f64) -> (f64, f64, f64, f64) {
    let mu = clip(mu, FLOOR, 1.0 - FLOOR);
    let mut nu = clip(nu, FLOOR, 1.0 - FLOOR);
    if nu >= mu {
        nu = mu * (1.0 - 1e-3);
    }
    let mut p_mu = clip(p_mu, FLOOR, 1.0);
    let mut p_nu = clip(p_nu, FLOOR, 1.0);
    let sum = p_mu + p_nu;
    if sum >= 1.0 {
        let s = (1.0 - FLOOR) / sum;
        p_mu = (p_mu * s).max(FLOOR);
        p_nu = (p_nu * s).max(FLOOR);
    }
    (mu, nu, p_mu, p_nu)
}

/// Maps arbitrary free coordinates onto a feasible [`ParameterVector`].
///
/// Intensities are clipped into `[1e-6, 1-1e-6]`, a decoy at or above the
/// signal is pulled to `μ(1-1e-3)`, probabilities are floored at `1e-6`
/// and rescaled to sum below one. Idempotent.
pub fn repair(raw: &[f64; FREE_DIMS]) -> ParameterVector {
    let (mu_a, nu_a, p_mu_a, p_nu_a) = repair_side(raw[0], raw[1], raw[2], raw[3]);
    let (mu_b, nu_b, p_mu_b, p_nu_b) = repair_side(raw[4], raw[5], raw[6], raw[7]);
    ParameterVector::from_free(mu_a, nu_a, p_mu_a, p_nu_a, mu_b, nu_b, p_mu_b, p_nu_b)
}

/// Draws a random feasible point.
fn sample_position<R: Rng>(rng: &mut R) -> [f64; FREE_DIMS] {
    let mut side = || {
        let mu = rng.gen_range(FLOOR..1.0 - FLOOR);
        let nu = mu * rng.gen::<f64>();
        let p_mu = rng.gen::<f64>();
        let p_nu = (1.0 - p_mu) * rng.gen::<f64>();
        [mu, nu, p_mu, p_nu]
    };
    let a = side();
    let b = side();
    repair(&[a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]).free()
}

fn v_max(cfg: &PsoConfig) -> [f64; FREE_DIMS] {
    let mut v = [0.0; FREE_DIMS];
    for (v, (lo, hi)) in v.iter_mut().zip(BOUNDS) {
        *v = cfg.v_max_frac * (hi - lo);
    }
    v
}

fn sample_velocity<R: Rng>(rng: &mut R, vmax: &[f64; FREE_DIMS]) -> [f64; FREE_DIMS] {
    let mut v = [0.0; FREE_DIMS];
    for (v, m) in v.iter_mut().zip(vmax) {
        *v = rng.gen_range(-m..=*m);
    }
    v
}

/// Evaluates a fitness function over a batch of points.
///
/// Implementations may evaluate concurrently; they must write `out[i]` for
/// `points[i]` and nothing else, so results do not depend on scheduling.
pub trait Executor {
    fn map(
        &self,
        points: &[ParameterVector],
        out: &mut [f64],
        fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
    );
}

/// Evaluates one point after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map(
        &self,
        points: &[ParameterVector],
        out: &mut [f64],
        fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
    ) {
        for (o, p) in out.iter_mut().zip(points) {
            *o = fitness(p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    MaxIterations,
    /// The global best improved by less than `zeta` (relative) for
    /// `patience` consecutive iterations.
    Converged,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::MaxIterations => "max-iterations",
            Termination::Converged => "converged",
        }
    }
}

/// Swarm state. [`Swarm::step`] advances one iteration.
#[derive(Debug, Clone)]
pub struct Swarm {
    cfg: PsoConfig,
    vmax: [f64; FREE_DIMS],
    rngs: Vec<ChaCha8Rng>,
    positions: Vec<[f64; FREE_DIMS]>,
    velocities: Vec<[f64; FREE_DIMS]>,
    fitness: Vec<f64>,
    pbest: Vec<[f64; FREE_DIMS]>,
    pbest_fitness: Vec<f64>,
    gbest: [f64; FREE_DIMS],
    gbest_fitness: f64,
    iteration: usize,
    points: Vec<ParameterVector>,
}

impl Swarm {
    /// Random feasible initialization. Particles starting at zero fitness
    /// are redrawn up to `init_attempts` times.
    pub fn new<E: Executor + ?Sized>(
        cfg: &PsoConfig,
        executor: &E,
        fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
    ) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_particles;
        let vmax = v_max(cfg);
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(i as u64);
                r
            })
            .collect();
        let mut positions: Vec<_> = rngs.iter_mut().map(sample_position).collect();
        let velocities: Vec<_> = rngs.iter_mut().map(|r| sample_velocity(r, &vmax)).collect();
        let mut points: Vec<_> = positions.iter().map(repair).collect();
        let mut values = alloc::vec![0.0; n];
        executor.map(&points, &mut values, fitness);

        for _ in 0..cfg.init_attempts {
            let retry: Vec<usize> = (0..n).filter(|&i| !(values[i] > 0.0)).collect();
            if retry.is_empty() {
                break;
            }
            let fresh: Vec<ParameterVector> = retry
                .iter()
                .map(|&i| {
                    positions[i] = sample_position(&mut rngs[i]);
                    repair(&positions[i])
                })
                .collect();
            let mut fresh_values = alloc::vec![0.0; fresh.len()];
            executor.map(&fresh, &mut fresh_values, fitness);
            for (k, &i) in retry.iter().enumerate() {
                points[i] = fresh[k];
                values[i] = fresh_values[k];
            }
        }

        let mut best = 0;
        for i in 1..n {
            if values[i] > values[best] {
                best = i;
            }
        }
        Ok(Self {
            cfg: *cfg,
            vmax,
            rngs,
            pbest: positions.clone(),
            pbest_fitness: values.clone(),
            gbest: positions[best],
            gbest_fitness: values[best],
            positions,
            velocities,
            fitness: values,
            iteration: 0,
            points,
        })
    }

    /// One iteration: schedules, moves, repair, evaluation, best updates.
    pub fn step<E: Executor + ?Sized>(
        &mut self,
        executor: &E,
        fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
    ) {
        self.iteration += 1;
        let t = self.iteration;
        let cfg = &self.cfg;
        let w = schedule_w(t, cfg);
        let c1 = schedule_c(t, cfg.c1_min, cfg.c1_max, cfg.max_iters);
        let c2 = schedule_c(t, cfg.c2_min, cfg.c2_max, cfg.max_iters);
        let explorers = cfg.explorers();

        for i in 0..cfg.n_particles {
            let rng = &mut self.rngs[i];
            if i < explorers {
                self.positions[i] = sample_position(rng);
                self.velocities[i] = sample_velocity(rng, &self.vmax);
            } else {
                let x = &mut self.positions[i];
                let v = &mut self.velocities[i];
                for d in 0..FREE_DIMS {
                    let r1: f64 = rng.gen();
                    let r2: f64 = rng.gen();
                    let vd = w * v[d]
                        + c1 * r1 * (self.pbest[i][d] - x[d])
                        + c2 * r2 * (self.gbest[d] - x[d]);
                    v[d] = vd.clamp(-self.vmax[d], self.vmax[d]);
                    x[d] += v[d];
                }
            }
            let g = repair(&self.positions[i]);
            self.positions[i] = g.free();
            self.points[i] = g;
        }

        executor.map(&self.points, &mut self.fitness, fitness);

        for i in 0..cfg.n_particles {
            let f = self.fitness[i];
            if f > self.pbest_fitness[i] {
                self.pbest[i] = self.positions[i];
                self.pbest_fitness[i] = f;
            }
            if f > self.gbest_fitness {
                self.gbest = self.positions[i];
                self.gbest_fitness = f;
            }
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn best(&self) -> (ParameterVector, f64) {
        (repair(&self.gbest), self.gbest_fitness)
    }

    pub fn positions(&self) -> &[[f64; FREE_DIMS]] {
        &self.positions
    }

    pub fn velocities(&self) -> &[[f64; FREE_DIMS]] {
        &self.velocities
    }

    pub fn velocity_limit(&self) -> &[f64; FREE_DIMS] {
        &self.vmax
    }
}

/// Result of a swarm run on an arbitrary fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub best: ParameterVector,
    pub fitness: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Global-best fitness after initialization and after each iteration.
    pub history: Vec<f64>,
}

/// Runs the swarm until `max_iters` or until the global best stalls.
pub fn maximize<E: Executor + ?Sized>(
    cfg: &PsoConfig,
    executor: &E,
    fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
) -> Result<SwarmOutcome> {
    let mut swarm = Swarm::new(cfg, executor, fitness)?;
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    history.push(swarm.gbest_fitness);
    let mut anchor = swarm.gbest_fitness;
    let mut stalled = 0;
    let mut termination = Termination::MaxIterations;
    while swarm.iteration < cfg.max_iters {
        swarm.step(executor, fitness);
        let best = swarm.gbest_fitness;
        history.push(best);
        if best - anchor > cfg.zeta * anchor.abs() {
            anchor = best;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.patience {
                termination = Termination::Converged;
                break;
            }
        }
    }
    let (best, fitness) = swarm.best();
    Ok(SwarmOutcome {
        best,
        fitness,
        iterations: swarm.iteration,
        termination,
        history,
    })
}

/// Key rate used as swarm fitness; invalid or aborted points score 0.
pub fn rate_fitness(g: &ParameterVector, cfg: &ChannelConfig, proto: &ProtocolConfig) -> f64 {
    secure_key_rate(g, cfg, proto)
        .map(|b| b.rate)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub params: ParameterVector,
    pub breakdown: KeyRateBreakdown,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<f64>,
}

/// Maximizes the secure key rate with the given executor.
pub fn optimize_on<E: Executor + ?Sized>(
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    pso: &PsoConfig,
    executor: &E,
) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    proto.validate()?;
    let fitness = |g: &ParameterVector| rate_fitness(g, cfg, proto);
    let run = maximize(pso, executor, &fitness)?;
    let breakdown = secure_key_rate(&run.best, cfg, proto)?;
    Ok(OptimizeOutcome {
        params: run.best,
        breakdown,
        iterations: run.iterations,
        termination: run.termination,
        history: run.history,
    })
}

/// Maximizes the secure key rate, evaluating particles serially.
pub fn optimize(
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    pso: &PsoConfig,
) -> Result<OptimizeOutcome> {
    optimize_on(cfg, proto, pso, &Serial)
}
