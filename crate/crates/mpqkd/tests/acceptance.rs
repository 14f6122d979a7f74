//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mpqkd::parallel;
use mpqkd_core::optimizer::{maximize, rate_fitness, repair, PsoConfig, Serial};
use mpqkd_core::oracle::compare;
use mpqkd_core::{
    binary_entropy, chernoff_lower, chernoff_upper, gamma_sampling, secure_key_rate, ChannelConfig,
    OracleConfig, ParameterVector, ProtocolConfig, Strategy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

struct Point {
    name: &'static str,
    free: [f64; 8],
    la: f64,
    lb: f64,
    strategy: Strategy,
    rate: f64,
}

const POINTS: [Point; 5] = [
    Point {
        name: "A",
        free: [0.424, 0.0213, 0.254, 0.180, 0.424, 0.0213, 0.254, 0.180],
        la: 100.0,
        lb: 100.0,
        strategy: Strategy::Symmetric,
        rate: 2.95e-5,
    },
    Point {
        name: "B",
        free: [0.216, 0.00449, 0.170, 0.229, 0.621, 0.0376, 0.305, 0.192],
        la: 75.0,
        lb: 125.0,
        strategy: Strategy::AsymmetricIntensity,
        rate: 1.84e-5,
    },
    Point {
        name: "C",
        free: [0.492, 0.0258, 0.271, 0.220, 0.492, 0.0258, 0.271, 0.220],
        la: 75.0,
        lb: 125.0,
        strategy: Strategy::ExtraAttenuation,
        rate: 5.71e-6,
    },
    Point {
        name: "D",
        free: [0.107, 0.000624, 0.0902, 0.309, 0.718, 0.0549, 0.327, 0.230],
        la: 50.0,
        lb: 150.0,
        strategy: Strategy::AsymmetricIntensity,
        rate: 5.89e-6,
    },
    Point {
        name: "E",
        free: [0.560, 0.0321, 0.278, 0.281, 0.560, 0.0321, 0.278, 0.281],
        la: 50.0,
        lb: 150.0,
        strategy: Strategy::ExtraAttenuation,
        rate: 6.37e-7,
    },
];

fn vector(f: &[f64; 8]) -> ParameterVector {
    ParameterVector::from_free(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7])
}

fn channel(p: &Point) -> ChannelConfig {
    ChannelConfig {
        la_km: p.la,
        lb_km: p.lb,
        strategy: p.strategy,
        ..Default::default()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

/// Runs one criterion; it fails if it exceeds `limit` seconds.
fn report(id: u32, title: &str, limit: Option<f64>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = run();
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit.map_or(true, |l| secs <= l);
    let pass = o.pass && in_time;
    let tag = if pass { "PASS" } else { "FAIL" };
    let budget = limit.map(|l| format!(" of {l:.0} s")).unwrap_or_default();
    println!(
        "criterion {id} [{tag}] {title} ({secs:.1} s{budget}): {}",
        o.detail
    );
    pass
}

/// Reference operating points through the `evaluate` subcommand.
fn reference_points() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in &POINTS {
        let g = vector(&p.free);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpqkd"));
        cmd.args(["evaluate", "--format", "csv"]);
        let keys = [
            "mu_a", "nu_a", "p_mu_a", "p_nu_a", "mu_b", "nu_b", "p_mu_b", "p_nu_b",
        ];
        for (k, v) in keys.iter().zip(p.free) {
            cmd.arg("--set").arg(format!("params.{k}={v}"));
        }
        cmd.arg("--set").arg(format!("params.p_o_a={}", g.p_o_a));
        cmd.arg("--set").arg(format!("params.p_o_b={}", g.p_o_b));
        cmd.arg("--set").arg(format!("channel.la_km={}", p.la));
        cmd.arg("--set").arg(format!("channel.lb_km={}", p.lb));
        cmd.arg("--set")
            .arg(format!("channel.strategy={}", p.strategy.name()));
        let start = Instant::now();
        let out = cmd.output().expect("run mpqkd");
        let took = start.elapsed();
        let text = String::from_utf8_lossy(&out.stdout);
        let rate: f64 = text
            .lines()
            .nth(1)
            .and_then(|l| l.split(',').next())
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN);
        let ratio = rate / p.rate;
        let ok =
            out.status.success() && (ratio - 1.0).abs() <= 0.25 && took < Duration::from_secs(1);
        pass &= ok;
        parts.push(format!(
            "{} R={rate:.3e} ratio={ratio:.3} {}ms",
            p.name,
            took.as_millis()
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn strategy_ordering() -> Outcome {
    let proto = ProtocolConfig::default();
    let pso = PsoConfig {
        n_particles: 60,
        max_iters: 150,
        seed: 7,
        ..Default::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for delta in [50.0, 100.0] {
        let rate = |s| {
            let ch = ChannelConfig::from_total(200.0, delta, s);
            parallel::optimize(&ch, &proto, &pso)
                .map(|o| o.breakdown.rate)
                .unwrap_or(0.0)
        };
        let asym = rate(Strategy::AsymmetricIntensity);
        let extra = rate(Strategy::ExtraAttenuation);
        let ratio = asym / extra;
        pass &= ratio >= 2.0;
        parts.push(format!(
            "dL={delta}: asym {asym:.3e} / extra {extra:.3e} = {ratio:.2}x"
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn optimizer_recovery() -> Outcome {
    let p = &POINTS[0];
    let target = 0.75 * p.rate;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [1, 2, 3] {
        let pso = PsoConfig {
            seed,
            ..Default::default()
        };
        let out = parallel::optimize(&channel(p), &ProtocolConfig::default(), &pso);
        let (rate, iters) = out
            .map(|o| (o.breakdown.rate, o.iterations))
            .unwrap_or((0.0, 0));
        pass &= rate >= target && iters <= 400;
        parts.push(format!(
            "seed {seed}: R={rate:.4e} after {iters} iterations"
        ));
    }
    Outcome {
        pass,
        detail: format!("target {target:.4e}; {}", parts.join("; ")),
    }
}

fn oracle_agreement() -> Outcome {
    let p = &POINTS[0];
    let g = vector(&p.free);
    let ch = channel(p);
    let proto = ProtocolConfig::default();
    let oc = OracleConfig {
        rounds: 100_000_000,
        seed: 20_240_601,
        shards: 64,
    };
    let checks = parallel::simulate_experiment(&g, &ch, &proto, &oc)
        .and_then(|t| compare(&t, &g, &ch, &proto));
    match checks {
        Ok(checks) => {
            let worst = checks
                .iter()
                .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
                .unwrap();
            let pairs = &checks[0];
            let pass = checks.iter().all(|c| c.z.abs() <= 4.0);
            Outcome {
                pass,
                detail: format!(
                    "{} entries, max |z| = {:.2} at {}; pairs {} vs {:.1} (z = {:.2})",
                    checks.len(),
                    worst.z.abs(),
                    worst.label,
                    pairs.empirical,
                    pairs.expected,
                    pairs.z
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();

    let sandwich = (0..10_000).all(|_| {
        let chi = 10f64.powf(rng.gen_range(-3.0..12.0));
        let eps = 10f64.powf(rng.gen_range(-15.0..-0.5));
        chernoff_lower(chi, eps) <= chi && chi <= chernoff_upper(chi, eps)
    });
    if !sandwich {
        failures.push("chernoff sandwich");
    }

    let (eps, n, p, trials) = (1e-3, 10_000u64, 0.1, 100_000);
    let mean = n as f64 * p;
    let binom = Binomial::new(n, p).unwrap();
    let (mut up_miss, mut low_miss) = (0u32, 0u32);
    for _ in 0..trials {
        let chi = binom.sample(&mut rng) as f64;
        up_miss += u32::from(chernoff_upper(chi, eps) < mean);
        low_miss += u32::from(chernoff_lower(chi, eps) > mean);
    }
    let up_rate = f64::from(up_miss) / f64::from(trials);
    let low_rate = f64::from(low_miss) / f64::from(trials);
    if up_rate >= 10.0 * eps || low_rate >= 10.0 * eps {
        failures.push("chernoff coverage");
    }

    let entropy = (0..10_000).all(|_| {
        let x: f64 = rng.gen();
        (binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap()).abs() <= 1e-12
    });
    if !entropy {
        failures.push("entropy symmetry");
    }

    let gamma = (0..10_000).all(|_| {
        let a = 10f64.powf(rng.gen_range(-12.0..-1.0));
        let b = rng.gen_range(0.001..0.999);
        let c = 10f64.powf(rng.gen_range(0.0..10.0));
        let d = 10f64.powf(rng.gen_range(0.0..10.0));
        let g1 = gamma_sampling(a, b, c, d).unwrap();
        let g2 = gamma_sampling(a, b, d, c).unwrap();
        (g1 - g2).abs() <= 1e-12 * g1.max(1e-300)
    });
    if !gamma {
        failures.push("gamma symmetry");
    }

    let ch = channel(&POINTS[0]);
    let proto = ProtocolConfig::default();
    let fitness = |g: &ParameterVector| rate_fitness(g, &ch, &proto);
    let monotone = (0..20u64).all(|seed| {
        let pso = PsoConfig {
            n_particles: 30,
            max_iters: 60,
            seed,
            ..Default::default()
        };
        let run = maximize(&pso, &Serial, &fitness).unwrap();
        run.history.windows(2).all(|w| w[1] >= w[0])
    });
    if !monotone {
        failures.push("pso global best monotone");
    }

    let idempotent = (0..10_000).all(|i| {
        let mut raw = [0.0; 8];
        for v in &mut raw {
            *v = rng.gen_range(-2.0..3.0);
        }
        if i % 100 == 0 {
            raw[i / 100 % 8] = f64::NAN;
        }
        let once = repair(&raw);
        once.validate().is_ok() && repair(&once.free()) == once
    });
    if !idempotent {
        failures.push("repair idempotence");
    }

    let mut monotone_rate = true;
    for pt in &POINTS {
        let g = vector(&pt.free);
        let base = channel(pt);
        let rate =
            |ch: &ChannelConfig, pr: &ProtocolConfig| secure_key_rate(&g, ch, pr).unwrap().rate;
        let series = |rates: Vec<f64>| rates.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        monotone_rate &= series(
            [0.0, 1e-10, 1e-9, 1e-8, 3e-8, 1e-7, 1e-6, 1e-5]
                .iter()
                .map(|&pd| {
                    rate(
                        &ChannelConfig {
                            dark_count: pd,
                            ..base
                        },
                        &proto,
                    )
                })
                .collect(),
        );
        monotone_rate &= series(
            [0.0, 0.02, 0.05, 0.08, 0.1, 0.12, 0.15, 0.2]
                .iter()
                .map(|&e| rate(&base, &ProtocolConfig { e_d_x: e, ..proto }))
                .collect(),
        );
        monotone_rate &= series(
            [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.03, 0.05]
                .iter()
                .map(|&e| rate(&base, &ProtocolConfig { e_d_z: e, ..proto }))
                .collect(),
        );
    }
    if !monotone_rate {
        failures.push("rate monotone in p_d and e_d");
    }

    let detail = format!(
        "coverage misses upper {up_rate:.1e} lower {low_rate:.1e} (limit {:.0e}); {}",
        10.0 * eps,
        if failures.is_empty() {
            String::from("all suites hold")
        } else {
            failures.join(", ")
        }
    );
    Outcome {
        pass: failures.is_empty(),
        detail,
    }
}

fn finite_key_ordering() -> Outcome {
    let p = &POINTS[0];
    let g = vector(&p.free);
    let ch = channel(p);
    let rate = |proto: ProtocolConfig| secure_key_rate(&g, &ch, &proto).unwrap().rate;
    let base = ProtocolConfig::default();
    let r11 = rate(ProtocolConfig {
        pulses: 1e11,
        ..base
    });
    let r12 = rate(ProtocolConfig {
        pulses: 1e12,
        ..base
    });
    let r13 = rate(ProtocolConfig {
        pulses: 1e13,
        ..base
    });
    let l200 = rate(ProtocolConfig {
        pairing_interval: 200,
        ..base
    });
    let l2000 = rate(base);
    Outcome {
        pass: r11 <= r12 && r12 <= r13 && l200 <= l2000,
        detail: format!(
            "N=1e11 {r11:.3e} <= 1e12 {r12:.3e} <= 1e13 {r13:.3e}; l=200 {l200:.3e} <= l=2000 {l2000:.3e}"
        ),
    }
}

fn main() -> ExitCode {
    let results = [
        report(1, "reference operating points", Some(5.0), reference_points),
        report(
            2,
            "strategy ordering at 200 km",
            Some(60.0),
            strategy_ordering,
        ),
        report(
            3,
            "optimizer recovery at point A",
            Some(600.0),
            optimizer_recovery,
        ),
        report(
            4,
            "oracle agreement at point A, 1e8 rounds",
            Some(300.0),
            oracle_agreement,
        ),
        report(5, "property suites", None, property_suites),
        report(6, "finite-key ordering", Some(60.0), finite_key_ordering),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
