//! The four subcommands as library functions returning serializable
//! reports. Formatting and exit codes live in [`crate::cli`].

use mpqkd_core::optimizer::{OptimizeOutcome, PsoConfig, Termination};
use mpqkd_core::oracle::{compare, Check, Tally};
use mpqkd_core::{
    plob_bound, secure_key_rate, transmittance, ChannelConfig, KeyRateBreakdown, OracleConfig,
    ParameterVector, Strategy,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::parallel;

/// Largest `|z|` an oracle check may show and still pass.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub rate: f64,
    pub reason: Option<String>,
    pub breakdown: KeyRateBreakdown,
}

impl From<KeyRateBreakdown> for EvaluateReport {
    fn from(b: KeyRateBreakdown) -> Self {
        Self {
            rate: b.rate,
            reason: b.abort.map(|a| a.describe().to_owned()),
            breakdown: b,
        }
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateReport, CliError> {
    let g = cfg.params()?;
    Ok(secure_key_rate(&g, &cfg.channel, &cfg.protocol)?.into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub seed: u64,
    pub rate: f64,
    pub reason: Option<String>,
    pub iterations: usize,
    pub termination: Termination,
    pub params: ParameterVector,
    pub breakdown: KeyRateBreakdown,
    /// Global-best rate after initialization and after every iteration.
    pub history: Vec<f64>,
}

impl OptimizeReport {
    fn new(out: OptimizeOutcome, seed: u64) -> Self {
        Self {
            seed,
            rate: out.breakdown.rate,
            reason: out.breakdown.abort.map(|a| a.describe().to_owned()),
            iterations: out.iterations,
            termination: out.termination,
            params: out.params,
            breakdown: out.breakdown,
            history: out.history,
        }
    }
}

pub fn optimize(cfg: &RunConfig) -> Result<OptimizeReport, CliError> {
    let out = parallel::optimize(&cfg.channel, &cfg.protocol, &cfg.pso)?;
    Ok(OptimizeReport::new(out, cfg.pso.seed))
}

/// One sweep point, in CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub total_km: f64,
    pub delta_l_km: f64,
    pub strategy: Strategy,
    #[serde(rename = "R")]
    pub rate: f64,
    /// Repeaterless bound of the end-to-end fiber transmittance.
    pub plob: f64,
    pub params: Option<ParameterVector>,
    /// `η_a μ_a / η_b μ_b`.
    pub ratio_mu: Option<f64>,
    /// `η_a ν_a / η_b ν_b`.
    pub ratio_nu: Option<f64>,
    pub reason: Option<String>,
}

pub const SWEEP_HEADER: [&str; 18] = [
    "total_km",
    "delta_L_km",
    "strategy",
    "R",
    "plob",
    "mu_a",
    "nu_a",
    "p_mu_a",
    "p_nu_a",
    "mu_b",
    "nu_b",
    "p_mu_b",
    "p_nu_b",
    "ratio_mu",
    "ratio_nu",
    "p_o_a",
    "p_o_b",
    "reason",
];

/// Nine significant digits in exponent form.
pub fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

impl SweepRow {
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
        let mut rec = vec![
            sci(self.total_km),
            sci(self.delta_l_km),
            self.strategy.name().to_owned(),
            sci(self.rate),
            sci(self.plob),
        ];
        match &self.params {
            Some(g) => rec.extend(g.free().iter().map(|v| sci(*v))),
            None => rec.extend(std::iter::repeat(String::new()).take(8)),
        }
        rec.push(opt(self.ratio_mu));
        rec.push(opt(self.ratio_nu));
        rec.push(opt(self.params.map(|g| g.p_o_a)));
        rec.push(opt(self.params.map(|g| g.p_o_b)));
        rec.push(self.reason.clone().unwrap_or_default());
        rec
    }
}

fn end_to_end_plob(ch: &ChannelConfig) -> f64 {
    let eta = 10f64.powf(-ch.alpha_db_per_km * ch.total_km() / 10.0);
    plob_bound(eta).unwrap_or(f64::INFINITY)
}

fn sweep_point(cfg: &RunConfig, total: f64, index: usize) -> SweepRow {
    let spec = &cfg.sweep;
    let arms = ChannelConfig::from_total(total, spec.delta_l_km, spec.strategy);
    let ch = ChannelConfig {
        la_km: arms.la_km,
        lb_km: arms.lb_km,
        strategy: spec.strategy,
        ..cfg.channel
    };
    let mut row = SweepRow {
        total_km: total,
        delta_l_km: spec.delta_l_km,
        strategy: spec.strategy,
        rate: 0.0,
        plob: end_to_end_plob(&ch),
        params: None,
        ratio_mu: None,
        ratio_nu: None,
        reason: None,
    };
    let result = if spec.optimize {
        let pso = PsoConfig {
            seed: cfg.pso.seed.wrapping_add(index as u64),
            ..cfg.pso
        };
        mpqkd_core::optimizer::optimize(&ch, &cfg.protocol, &pso).map(|o| (o.params, o.breakdown))
    } else {
        match cfg.params {
            Some(g) => secure_key_rate(&g, &ch, &cfg.protocol).map(|b| (g, b)),
            None => {
                row.reason = Some("no parameter vector configured".into());
                return row;
            }
        }
    };
    match result {
        Ok((g, b)) => {
            let t = transmittance(&ch);
            row.rate = b.rate;
            row.params = Some(g);
            row.ratio_mu = Some(t.eta_a * g.mu_a / (t.eta_b * g.mu_b));
            row.ratio_nu = Some(t.eta_a * g.nu_a / (t.eta_b * g.nu_b));
            row.reason = b.abort.map(|a| a.describe().to_owned());
        }
        Err(e) => row.reason = Some(e.to_string()),
    }
    row
}

/// Evaluates or optimizes every sweep distance. Points run concurrently;
/// point `i` uses swarm seed `seed + i`, so rows do not depend on thread
/// scheduling.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let totals = cfg.sweep.total_km.points()?;
    if !cfg.sweep.optimize {
        cfg.params()?;
    } else {
        cfg.pso.validate()?;
    }
    cfg.protocol.validate()?;
    Ok(totals
        .par_iter()
        .enumerate()
        .map(|(i, &d)| sweep_point(cfg, d, i))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub oracle: OracleConfig,
    pub tally: Tally,
    pub checks: Vec<Check>,
    pub max_abs_z: f64,
    pub passed: bool,
}

pub fn oracle(cfg: &RunConfig) -> Result<OracleReport, CliError> {
    let g = cfg.params()?;
    let tally = parallel::simulate_experiment(&g, &cfg.channel, &cfg.protocol, &cfg.oracle)?;
    let checks = compare(&tally, &g, &cfg.channel, &cfg.protocol)?;
    let max_abs_z = checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    Ok(OracleReport {
        oracle: cfg.oracle,
        tally,
        checks,
        max_abs_z,
        passed: max_abs_z <= Z_LIMIT,
    })
}
