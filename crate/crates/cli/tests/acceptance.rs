//! Acceptance suite. Runs every criterion at its stated tolerance and
//! prints one line per criterion; exits nonzero if any fails.
//!
//! `cargo test -p aimd-cli --test acceptance` (add `--release` for speed;
//! the test profile is already optimized).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use aimd_cli::config::{parse_config_str, Variant, DEFAULT_CONFIG};
use aimd_cli::experiment::{prepare, run_experiment, run_seed, summarize_seed, EARLY_EVENT};
use aimd_core::agentsim::{event_to_matrix_residual, run_agent_simulation, SimConfig};
use aimd_core::averaged::check_hilbert_contraction;
use aimd_core::chains::{run_fixed_chain, run_longterm_chain, xi_lambda, RunConfig};
use aimd_core::generator::{random_quadratic_costs, GeneratorParams};
use aimd_core::kkt::{solve_kkt, solve_p_fixed_point, DEFAULT_TOL};
use aimd_core::matrices::{
    contraction_factor, lifted_contraction_bound_check, restricted_norm, AimdParams, DropPattern,
};
use aimd_core::problem::{gamma_upper_bound, Clamp, CostFunction};
use aimd_core::simplex::{l1_distance, linf_distance};
use aimd_core::trace::{write_trace_csv, Trace};
use aimd_core::{NetworkSpec, SimplexPoint};

struct Outcome {
    pass: bool,
    detail: String,
}

fn csv_bytes(trace: &Trace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).expect("in-memory csv");
    buf
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Column sums, restricted norms of every pattern matrix and of `A₁`, and
/// the lifted window bound, on random parameter sets.
fn matrix_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let specs: Vec<(usize, AimdParams)> = (0..200)
        .map(|_| {
            let n = rng.gen_range(2..=10);
            let alpha =
                SimplexPoint::from_weights((0..n).map(|_| rng.gen_range(0.01..1.0)).collect())
                    .unwrap();
            let beta = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            (n, AimdParams::new(alpha, beta).unwrap())
        })
        .collect();
    let seeds: Vec<u64> = (0..200).map(|_| rng.gen()).collect();
    let failures: Vec<String> = specs
        .par_iter()
        .zip(seeds)
        .enumerate()
        .filter_map(|(idx, ((n, p), seed))| {
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            let patterns: Vec<DropPattern> = if *n <= 6 {
                (0..1u64 << n).map(|b| DropPattern::from_bits(*n, b)).collect()
            } else {
                (0..64).map(|_| DropPattern::from_bits(*n, prng.gen_range(0..1u64 << n))).collect()
            };
            let mut worst_sum: f64 = 0.0;
            let mut worst_norm: f64 = 0.0;
            for pat in &patterns {
                let a = p.matrix(pat).unwrap();
                worst_sum = a.column_sums().iter().map(|s| (s - 1.0).abs()).fold(worst_sum, f64::max);
                worst_norm = worst_norm.max(restricted_norm(a.matrix()).unwrap());
            }
            let c = contraction_factor(p).unwrap();
            let lifted_ok = [2usize, 5, 10].iter().all(|t| lifted_contraction_bound_check(p, *t).unwrap().holds);
            let ok = worst_sum <= 1e-12 && worst_norm <= 1.0 + 1e-12 && c < 1.0 && lifted_ok;
            (!ok).then(|| {
                format!("spec {idx} (n={n}): column-sum err {worst_sum:e}, norm {worst_norm}, c {c}, lifted {lifted_ok}")
            })
        })
        .collect();
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "200 specs, all patterns within tolerance, lifted bound holds for T in {2,5,10}".into()
        } else {
            failures.join("; ")
        },
    }
}

fn fixed_chain_params() -> AimdParams {
    AimdParams::uniform(3, 0.85).unwrap()
}

const FIXED_LAMBDA: [f64; 3] = [0.9, 0.6, 0.3];

fn fixed_chain_trace(seed: u64) -> Trace {
    let x0 = SimplexPoint::uniform(3);
    run_fixed_chain(
        &fixed_chain_params(),
        &FIXED_LAMBDA,
        &x0,
        &RunConfig::new(200_000, 10_000, seed),
    )
    .unwrap()
}

/// Time average of the fixed-probability chain against its invariant mean.
fn ergodic_limit() -> Outcome {
    let xi = xi_lambda(&FIXED_LAMBDA, &fixed_chain_params()).unwrap();
    let errors: Vec<f64> = (0..10u64)
        .into_par_iter()
        .map(|s| l1_distance(&fixed_chain_trace(s).time_average, xi.as_slice()))
        .collect();
    let good = errors.iter().filter(|e| **e <= 0.02).count();
    Outcome {
        pass: good >= 9,
        detail: format!(
            "{good}/10 seeds with ‖x̄-ξ‖₁ ≤ 0.02 (max {:.4})",
            errors.iter().cloned().fold(0.0, f64::max)
        ),
    }
}

/// KKT solver against the closed form for quadratics, and against the
/// fixed point of the averaged map for mixed families.
fn kkt_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut quad_worst: f64 = 0.0;
    for s in 0..50 {
        let n = rng.gen_range(2..=20);
        let capacity = rng.gen_range(0.5..3.0);
        let costs = random_quadratic_costs(n, 0.1, 100.0, s).unwrap();
        let sol = solve_kkt(&costs, capacity, DEFAULT_TOL).unwrap();
        let closed =
            SimplexPoint::from_weights(costs.iter().map(|c| 1.0 / c.coefficients()[0]).collect())
                .unwrap();
        quad_worst = quad_worst.max(linf_distance(sol.point.as_slice(), closed.as_slice()));
    }
    let mut mixed_worst: f64 = 0.0;
    let mut accepted = 0;
    let mut seed = 0;
    while accepted < 50 && seed < 10_000 {
        seed += 1;
        let n = rng.gen_range(2..=30);
        let Ok(net) = GeneratorParams::new(n, 100.0, 1.0 / 1300.0).generate(seed) else {
            continue;
        };
        let Ok(p) = solve_p_fixed_point(net.rules(), DEFAULT_TOL) else {
            continue;
        };
        let clamped = net
            .rules()
            .iter()
            .zip(p.point.as_slice())
            .any(|(r, x)| r.evaluate(*x).1 != Clamp::None);
        if clamped {
            continue;
        }
        let k = solve_kkt(&net.costs(), net.capacity(), DEFAULT_TOL).unwrap();
        mixed_worst = mixed_worst.max(linf_distance(k.point.as_slice(), p.point.as_slice()));
        accepted += 1;
    }
    Outcome {
        pass: quad_worst <= 1e-10 && accepted == 50 && mixed_worst <= 1e-8,
        detail: format!(
            "quadratic max gap {quad_worst:e} (≤ 1e-10); {accepted} unclamped mixed specs, max gap {mixed_worst:e} (≤ 1e-8)"
        ),
    }
}

fn quadratic_network() -> NetworkSpec {
    let costs: Vec<CostFunction> = random_quadratic_costs(10, 1.0, 100.0, 4).unwrap();
    let gamma = gamma_upper_bound(&costs, 1.0).unwrap();
    NetworkSpec::homogeneous(costs, 1.0, gamma, 1e-6, 0.01, 0.85).unwrap()
}

fn longterm_trace(net: &NetworkSpec, seed: u64) -> Trace {
    run_longterm_chain(
        net,
        &SimplexPoint::uniform(net.n()),
        &RunConfig::new(100_000, 1_000, seed),
    )
    .unwrap()
}

/// Long-term averaging chain on a 10-agent quadratic network.
fn longterm_convergence() -> Outcome {
    let net = quadratic_network();
    let x_star = solve_kkt(&net.costs(), 1.0, DEFAULT_TOL).unwrap().point;
    let errs: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|s| {
            let t = longterm_trace(&net, s);
            let early = t.at_or_before(1_000).unwrap();
            let last = t.last().unwrap();
            (
                linf_distance(&early.xbar, x_star.as_slice()),
                linf_distance(&last.xbar, x_star.as_slice()),
            )
        })
        .collect();
    let finals: Vec<f64> = errs.iter().map(|e| e.1).collect();
    let earlies: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let good = finals.iter().filter(|e| **e <= 0.05).count();
    let (m_early, m_final) = (median(&earlies), median(&finals));
    Outcome {
        pass: good >= 9 && m_final < m_early,
        detail: format!("{good}/10 seeds with max error ≤ 0.05; median {m_early:.4} at 10³ → {m_final:.4} at 10⁵"),
    }
}

fn bundled(variant: Variant, events: u64) -> aimd_cli::ExperimentSpec {
    let mut spec = parse_config_str(DEFAULT_CONFIG).unwrap();
    spec.run.variant = variant;
    spec.run.events = events;
    spec.run.stride = 1_000;
    spec
}

/// Trends of the 150-agent long-term run.
fn large_network_trends() -> Outcome {
    let spec = bundled(Variant::Longterm, 200_000);
    let prep = prepare(&spec).unwrap();
    let rows: Vec<_> = spec
        .run
        .seeds
        .par_iter()
        .map(|s| summarize_seed(&spec, &prep, &run_seed(&spec, &prep, *s).unwrap()))
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &rows {
        let (e0, s0) = (
            r.max_abs_error_at_early_event.unwrap(),
            r.consensus_spread_at_early_event.unwrap(),
        );
        let ok = r.final_consensus_spread <= 0.2 * s0 && r.final_max_abs_error < e0;
        pass &= ok;
        parts.push(format!(
            "seed {}: spread {:.3}→{:.3}, error {:.4}→{:.4}",
            r.seed, s0, r.final_consensus_spread, e0, r.final_max_abs_error
        ));
    }
    Outcome {
        pass,
        detail: format!("event {EARLY_EVENT} → 2·10⁵; {}", parts.join("; ")),
    }
}

/// Time average of the window chain on the 150-agent network.
fn window_time_average() -> Outcome {
    let mut spec = bundled(Variant::Window, 200_000);
    spec.run.window = Some(500);
    spec.run.seeds = (1..=5).collect();
    let prep = prepare(&spec).unwrap();
    let errs: Vec<f64> = spec
        .run
        .seeds
        .par_iter()
        .map(|s| {
            summarize_seed(&spec, &prep, &run_seed(&spec, &prep, *s).unwrap())
                .time_average_max_error
        })
        .collect();
    let good = errs.iter().filter(|e| **e <= 0.05).count();
    Outcome {
        pass: good >= 4,
        detail: format!("{good}/5 seeds with ‖time average - x*‖_∞ ≤ 0.05 (errors {errs:.4?})"),
    }
}

/// One-step Hilbert contraction of the averaged map on random networks.
fn hilbert_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut samples = 0;
    let mut checked = 0;
    let mut seed = 0;
    while checked < 20 {
        seed += 1;
        let n = rng.gen_range(2..=20);
        let Ok(net) = GeneratorParams::new(n, 100.0, 1.0 / 1300.0).generate(seed) else {
            continue;
        };
        for eta in [0.25, 0.5, 1.0] {
            let r = check_hilbert_contraction(net.rules(), eta, 0.01, 100, seed).unwrap();
            violations += r.violations;
            samples += r.samples;
        }
        checked += 1;
    }
    Outcome {
        pass: violations == 0 && samples > 0,
        detail: format!("{samples} samples over 20 specs, {violations} violations"),
    }
}

fn always_drop_config(h: f64) -> SimConfig {
    let costs = vec![CostFunction::poly2(1.0).unwrap(); 2];
    let spec =
        NetworkSpec::homogeneous(costs, 1.0, 1.0, 1e-6, std::f64::consts::FRAC_1_PI, 0.85).unwrap();
    let mut cfg = SimConfig::new(spec, h, u64::MAX);
    cfg.x0 = Some(vec![0.6, 0.1]);
    cfg
}

const H_SWEEP: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Event-driven simulation against the matrix recursion as `h` shrinks.
fn agent_matrix_consistency() -> Outcome {
    let r: Vec<f64> = H_SWEEP
        .iter()
        .map(|h| event_to_matrix_residual(&always_drop_config(*h), 0, 100).unwrap())
        .collect();
    Outcome {
        pass: r[0] > r[1] && r[1] > r[2],
        detail: format!(
            "residuals {:e}, {:e}, {:e} for h = 1e-2, 1e-3, 1e-4",
            r[0], r[1], r[2]
        ),
    }
}

/// Reruns one seed of every stochastic criterion and compares CSV bytes,
/// then runs the CLI experiment twice and compares every file it wrote.
fn reproducibility() -> Outcome {
    let mut mismatches = Vec::new();
    let mut compare = |name: &str, f: &dyn Fn() -> Trace| {
        if csv_bytes(&f()) != csv_bytes(&f()) {
            mismatches.push(name.to_string());
        }
    };
    compare("fixed", &|| fixed_chain_trace(0));
    let net = quadratic_network();
    compare("longterm", &|| longterm_trace(&net, 0));
    let spec = bundled(Variant::Longterm, 200_000);
    let prep = prepare(&spec).unwrap();
    compare("longterm-150", &|| {
        run_seed(&spec, &prep, spec.run.seeds[0]).unwrap().trace
    });
    let mut wspec = bundled(Variant::Window, 200_000);
    wspec.run.window = Some(500);
    compare("window-150", &|| run_seed(&wspec, &prep, 1).unwrap().trace);
    compare("agent", &|| {
        let mut cfg = always_drop_config(1e-3);
        cfg.max_events = Some(100);
        cfg.stride = 1;
        run_agent_simulation(&cfg, 0).unwrap()
    });

    let mut small = bundled(Variant::Agent, 2_000);
    small.network.n = Some(20);
    small.run.seeds = vec![3, 4];
    small.run.stride = 100;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&small, d.path()).unwrap();
    }
    for s in &small.run.seeds {
        for file in ["trace.csv", "metrics.csv"] {
            let rel = format!("seed-{s}/{file}");
            let a = std::fs::read(dirs[0].path().join(&rel)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&rel)).unwrap();
            if a != b {
                mismatches.push(rel);
            }
        }
    }
    let summaries: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| std::fs::read(d.path().join("summary.json")).unwrap())
        .collect();
    if summaries[0] != summaries[1] {
        mismatches.push("summary.json".into());
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            "fixed, longterm, window, agent traces and CLI artifacts byte-identical on rerun".into()
        } else {
            format!("differing outputs: {}", mismatches.join(", "))
        },
    }
}

/// Name, runtime budget and check.
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "matrix invariants",
            Duration::from_secs(10),
            matrix_invariants,
        ),
        (
            "ergodic limit of the fixed chain",
            Duration::from_secs(30),
            ergodic_limit,
        ),
        (
            "KKT oracle equivalence",
            Duration::from_secs(5),
            kkt_equivalence,
        ),
        (
            "long-term convergence, n=10",
            Duration::from_secs(120),
            longterm_convergence,
        ),
        (
            "150-agent long-term trends",
            Duration::from_secs(600),
            large_network_trends,
        ),
        (
            "window time average, T=500",
            Duration::from_secs(600),
            window_time_average,
        ),
        (
            "Hilbert contraction",
            Duration::from_secs(10),
            hilbert_contraction,
        ),
        (
            "simulation-to-matrix consistency",
            Duration::from_secs(30),
            agent_matrix_consistency,
        ),
        (
            "reproducibility",
            Duration::from_secs(1200),
            reproducibility,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == (i + 1).to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= *budget;
        let pass = outcome.pass && in_budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{label}: {} [{name}] {} ({:.1}s of {}s{})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_budget { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
