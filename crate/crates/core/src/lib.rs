//! Finite-key key-rate model for asymmetric mode-pairing quantum key
//! distribution (MP-QKD).
//!
//! The crate is `no_std` (it needs `alloc` only for the particle swarm) and
//! splits into:
//!
//! - [`primitives`]: binary entropy, Poisson photon statistics, fiber
//!   transmittance, the PLOB repeaterless bound and `I₀`.
//! - [`channel`]: the analytic expected-statistics model of the experiment
//!   (response probabilities, pairing rate, counts per intensity pair).
//! - [`stats`]: Chernoff bounds and the sampling-without-replacement term.
//! - [`security`]: the decoy-state estimator chain ending in the secure key
//!   length and key rate.
//! - [`optimizer`]: the modified particle swarm that maximizes the key rate
//!   over the eight free source parameters.
//! - [`oracle`]: a round-level Monte Carlo simulator of the same experiment,
//!   used to cross-check [`channel`].
//!
//! Everything is a pure function of its inputs. Randomness only enters
//! through explicit seeds, and results are bit-identical for a fixed seed.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]
// `!(x > 0.0)` rejects NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod channel;
pub mod optimizer;
pub mod oracle;
pub mod primitives;
pub mod security;
pub mod stats;

pub use channel::{
    avg_response_prob, expected_statistics, pairs_per_round, response_prob, Entry, Level,
    ObservedStats, ParameterVector, ProtocolConfig,
};
pub use error::Error;
pub use optimizer::{optimize, repair, OptimizeOutcome, PsoConfig, Termination};
pub use oracle::{simulate_experiment, OracleConfig, Tally};
pub use primitives::{
    bessel_i0, binary_entropy, plob_bound, poisson_coeff, transmittance, ChannelConfig, Strategy,
    Transmittances,
};
pub use security::{secure_key_rate, AbortReason, KeyRateBreakdown};
pub use stats::{chernoff_lower, chernoff_upper, gamma_sampling, SecurityBudget};

pub type Result<T, E = Error> = core::result::Result<T, E>;
