//! Running a configured experiment and writing its artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.json
//! seed-<s>/trace.csv
//! seed-<s>/metrics.csv
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use aimd_core::agentsim::{run_agent_simulation, Averaging, SimConfig};
use aimd_core::chains::{run_fixed_chain, run_longterm_chain, run_window_chain, RunConfig};
use aimd_core::kkt::{solve_kkt, solve_p_fixed_point, KktSolution, DEFAULT_TOL};
use aimd_core::metrics::{compute_metrics, window_band, write_metrics_csv, MetricSeries};
use aimd_core::simplex::linf_distance;
use aimd_core::trace::{write_trace_csv, ClampCounts, Trace};
use aimd_core::{NetworkSpec, SimplexPoint};

use crate::config::{ExperimentSpec, Variant};

/// Event at which early-run errors are compared against final ones.
pub const EARLY_EVENT: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterEcho {
    pub variant: Variant,
    pub n: usize,
    pub capacity: f64,
    pub gamma: f64,
    pub growth: f64,
    pub beta: f64,
    pub floor: f64,
    pub coeff_max: f64,
    pub generator_seed: u64,
    pub window: Option<usize>,
    pub events: u64,
    pub stride: u64,
    pub seeds: Vec<u64>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub events: u64,
    pub final_max_abs_error: f64,
    pub final_consensus_spread: f64,
    pub max_abs_error_at_early_event: Option<f64>,
    pub consensus_spread_at_early_event: Option<f64>,
    /// `‖mean of all states - x*‖_∞`.
    pub time_average_max_error: f64,
    /// Range of `‖window average - x*‖_∞` after the first window fills.
    pub window_band: Option<(f64, f64)>,
    pub renormalizations: u64,
    pub clamps: ClampCounts,
    pub clamp_fraction: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub parameters: ParameterEcho,
    pub kkt_multiplier: f64,
    pub kkt_residual: f64,
    pub kkt_min_share: f64,
    /// `‖clamped fixed point - KKT point‖₁`; nonzero only when clamps bind.
    pub p_fixed_point_gap: f64,
    pub early_event: u64,
    pub clamp_fraction: f64,
    pub renormalizations: u64,
    /// Medians over seeds.
    pub final_max_abs_error: f64,
    pub final_consensus_spread: f64,
    pub runs: Vec<SeedSummary>,
}

/// One seed's trace and metrics, computed without touching the filesystem.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: Trace,
    pub metrics: MetricSeries,
}

/// The network and reference solutions shared by all seeds.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub network: NetworkSpec,
    pub kkt: KktSolution,
    pub p_fixed_point: SimplexPoint,
}

pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let network = spec.network.build()?;
    let kkt = solve_kkt(&network.costs(), network.capacity(), DEFAULT_TOL)?;
    let p_fixed_point = solve_p_fixed_point(network.rules(), DEFAULT_TOL)?.point;
    Ok(Prepared {
        network,
        kkt,
        p_fixed_point,
    })
}

fn initial_point(spec: &ExperimentSpec, n: usize) -> Result<SimplexPoint> {
    match &spec.run.x0 {
        Some(x) if x.len() != n => bail!("run.x0 has {} entries for {n} agents", x.len()),
        Some(x) => Ok(SimplexPoint::new(x.clone())?),
        None => Ok(SimplexPoint::uniform(n)),
    }
}

pub fn run_seed(spec: &ExperimentSpec, prep: &Prepared, seed: u64) -> Result<SeedRun> {
    let net = &prep.network;
    let run = &spec.run;
    let x0 = initial_point(spec, net.n())?;
    let cfg = RunConfig::new(run.events, run.stride, seed);
    let trace = match run.variant {
        Variant::Fixed => {
            let lambda = match &run.lambda {
                Some(l) => l.clone(),
                None => net
                    .rules()
                    .iter()
                    .zip(prep.kkt.point.as_slice())
                    .map(|(r, x)| r.lambda(*x))
                    .collect(),
            };
            run_fixed_chain(&net.aimd_params()?, &lambda, &x0, &cfg)?
        }
        Variant::Window => run_window_chain(net, run.window.unwrap_or(1), &x0, &cfg)?,
        Variant::Longterm => run_longterm_chain(net, &x0, &cfg)?,
        Variant::Agent => {
            let mut sim = SimConfig::new(net.clone(), run.h, run.max_ticks.unwrap_or(u64::MAX));
            sim.max_events = Some(run.events);
            sim.stride = run.stride;
            sim.averaging = Averaging::LongTerm;
            sim.x0 = run
                .x0
                .as_ref()
                .map(|x| x.iter().map(|v| v * net.capacity()).collect());
            run_agent_simulation(&sim, seed)?
        }
    };
    let metrics = compute_metrics(&trace, &prep.kkt, &net.costs())?;
    Ok(SeedRun {
        seed,
        trace,
        metrics,
    })
}

pub fn summarize_seed(spec: &ExperimentSpec, prep: &Prepared, run: &SeedRun) -> SeedSummary {
    let m = &run.metrics;
    let x_star = prep.kkt.point.as_slice();
    let early = m.index_at(EARLY_EVENT).filter(|i| m.events[*i] > 0);
    let window_band = match spec.run.variant {
        Variant::Window => window_band(&run.trace, x_star, spec.run.window.unwrap_or(1) as u64),
        _ => None,
    };
    SeedSummary {
        seed: run.seed,
        events: run.trace.events,
        final_max_abs_error: m.final_max_abs_error(),
        final_consensus_spread: m.final_consensus_spread(),
        max_abs_error_at_early_event: early.map(|i| m.max_abs_error[i]),
        consensus_spread_at_early_event: early.map(|i| m.consensus_spread[i]),
        time_average_max_error: linf_distance(&run.trace.time_average, x_star),
        window_band,
        renormalizations: run.trace.renormalizations,
        clamps: run.trace.clamps,
        clamp_fraction: run.trace.clamps.fraction(),
        warnings: run.trace.warnings.clone(),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        l if l % 2 == 1 => v[l / 2],
        l => 0.5 * (v[l / 2 - 1] + v[l / 2]),
    }
}

pub fn summarize(spec: &ExperimentSpec, prep: &Prepared, runs: &[SeedRun]) -> Summary {
    let net = &prep.network;
    let seeds: Vec<SeedSummary> = runs.iter().map(|r| summarize_seed(spec, prep, r)).collect();
    let mut clamps = ClampCounts::default();
    seeds.iter().for_each(|s| clamps.merge(&s.clamps));
    Summary {
        parameters: ParameterEcho {
            variant: spec.run.variant,
            n: net.n(),
            capacity: net.capacity(),
            gamma: spec.network.gamma().unwrap_or(f64::NAN),
            growth: spec.network.growth,
            beta: spec.network.beta,
            floor: spec.network.floor,
            coeff_max: spec.network.coeff_max,
            generator_seed: spec.network.seed,
            window: spec.run.window,
            events: spec.run.events,
            stride: spec.run.stride,
            seeds: spec.run.seeds.clone(),
            h: (spec.run.variant == Variant::Agent).then_some(spec.run.h),
        },
        kkt_multiplier: prep.kkt.multiplier,
        kkt_residual: prep.kkt.residual,
        kkt_min_share: prep.kkt.point.min_coord(),
        p_fixed_point_gap: prep.kkt.point.l1_distance(prep.p_fixed_point.as_slice()),
        early_event: EARLY_EVENT,
        clamp_fraction: clamps.fraction(),
        renormalizations: seeds.iter().map(|s| s.renormalizations).sum(),
        final_max_abs_error: median(
            &seeds
                .iter()
                .map(|s| s.final_max_abs_error)
                .collect::<Vec<_>>(),
        ),
        final_consensus_spread: median(
            &seeds
                .iter()
                .map(|s| s.final_consensus_spread)
                .collect::<Vec<_>>(),
        ),
        runs: seeds,
    }
}

fn write_seed(dir: &Path, run: &SeedRun) -> Result<()> {
    let d = dir.join(format!("seed-{}", run.seed));
    fs::create_dir_all(&d).with_context(|| format!("cannot create {}", d.display()))?;
    let trace = File::create(d.join("trace.csv"))
        .with_context(|| format!("cannot write in {}", d.display()))?;
    write_trace_csv(&run.trace, BufWriter::new(trace))?;
    let metrics = File::create(d.join("metrics.csv"))
        .with_context(|| format!("cannot write in {}", d.display()))?;
    write_metrics_csv(&run.metrics, BufWriter::new(metrics))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Runs every seed in parallel, writes per-seed CSVs as they finish and the
/// summary once all are done.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Summary> {
    spec.check()?;
    let prep = prepare(spec)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let runs = spec
        .run
        .seeds
        .par_iter()
        .map(|seed| {
            let run = run_seed(spec, &prep, *seed)?;
            write_seed(out, &run)?;
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(spec, &prep, &runs);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
