//! Rayon-backed runners. Results are identical to the serial versions in
//! `mpqkd-core`; only wall-clock time changes.

use mpqkd_core::optimizer::{optimize_on, Executor, OptimizeOutcome, PsoConfig};
use mpqkd_core::oracle::{simulate_shard, Tally};
use mpqkd_core::{ChannelConfig, OracleConfig, ParameterVector, ProtocolConfig};
use rayon::prelude::*;

/// Evaluates swarm particles on the rayon thread pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map(
        &self,
        points: &[ParameterVector],
        out: &mut [f64],
        fitness: &(dyn Fn(&ParameterVector) -> f64 + Sync),
    ) {
        out.par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(o, p)| *o = fitness(p));
    }
}

pub fn optimize(
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    pso: &PsoConfig,
) -> mpqkd_core::Result<OptimizeOutcome> {
    optimize_on(cfg, proto, pso, &Rayon)
}

/// Runs oracle shards concurrently and merges them in shard order.
pub fn simulate_experiment(
    g: &ParameterVector,
    cfg: &ChannelConfig,
    proto: &ProtocolConfig,
    oc: &OracleConfig,
) -> mpqkd_core::Result<Tally> {
    oc.validate()?;
    let shards: Vec<Tally> = (0..oc.shards)
        .into_par_iter()
        .map(|s| simulate_shard(g, cfg, proto, oc, s))
        .collect::<Result<_, _>>()?;
    let mut total = Tally::default();
    for t in &shards {
        total.merge(t);
    }
    Ok(total)
}
