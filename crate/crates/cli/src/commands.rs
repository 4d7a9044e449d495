//! Command-line interface.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aimd_core::averaged::{write_averaged_csv, EpsSchedule, DEFAULT_HULL_SAMPLES};
use aimd_core::SimplexPoint;

use crate::analysis::{averaged_run, contraction_summary, kkt_report, matrices_report};
use crate::config::{parse_config, parse_config_str, ExperimentSpec, Variant, DEFAULT_CONFIG};
use crate::experiment::{run_experiment, write_json};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "AIMD_NUM_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "aimd-num",
    version,
    about = "AIMD-based distributed utility maximization experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML). Defaults to the bundled 150-agent config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory. Falls back to the config's `output.dir`, then `aimd-out`.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal allocation and the fixed point of the averaged map.
    Kkt {
        #[command(flatten)]
        common: Common,
    },
    /// Run a chain or the agent simulation for every seed.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        events: Option<u64>,
        #[arg(long)]
        stride: Option<u64>,
        /// Window length for the window variant.
        #[arg(long)]
        window: Option<usize>,
        /// Tick length for the agent variant.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Contraction factor, Perron vector and lifted-norm bounds.
    AnalyzeMatrices {
        #[command(flatten)]
        common: Common,
        /// Window lengths for the lifted check.
        #[arg(long = "window", default_values_t = vec![1usize, 2, 5, 10])]
        windows: Vec<usize>,
    },
    /// Iterate the deterministic averaged system.
    Averaged {
        #[command(flatten)]
        common: Common,
        /// Constant step weight. Without it the chain-induced schedule is used.
        #[arg(long)]
        eps: Option<f64>,
        /// `m` of the chain-induced schedule.
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Number of iterations.
        #[arg(long, default_value_t = 5000)]
        events: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
        #[arg(long, default_value_t = DEFAULT_HULL_SAMPLES)]
        hull_samples: usize,
    },
    /// Empirical Hilbert-metric contraction of one averaged step.
    ContractionReport {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also sweep a grid of step weights.
        #[arg(long)]
        sweep: bool,
    },
}

fn load(config: &Option<PathBuf>) -> Result<ExperimentSpec> {
    match config {
        Some(p) => parse_config(p),
        None => parse_config_str(DEFAULT_CONFIG),
    }
}

fn initial(spec: &ExperimentSpec, n: usize) -> Result<SimplexPoint> {
    match &spec.run.x0 {
        Some(x) if x.len() == n => Ok(SimplexPoint::new(x.clone())?),
        Some(x) => bail!("run.x0 has {} entries for {n} agents", x.len()),
        None => Ok(SimplexPoint::uniform(n)),
    }
}

/// Output directory used when neither the flag, the environment nor the config names one.
pub const DEFAULT_OUT: &str = "aimd-out";

fn out_dir(common: &Common, spec: &ExperimentSpec) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| spec.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kkt { common } => {
            let spec = load(&common.config)?;
            let out = out_dir(&common, &spec);
            let report = kkt_report(&spec.network.build()?)?;
            write_json(&out.join("kkt.json"), &report)?;
            println!(
                "multiplier {}  residual {:e}  fixed-point gap {:e}  clamped agents {}",
                report.kkt.multiplier,
                report.kkt.residual,
                report.gap,
                report.clamped_agents.len()
            );
            println!("wrote {}", out.join("kkt.json").display());
        }
        Command::Simulate {
            common,
            variant,
            seed,
            events,
            stride,
            window,
            h,
        } => {
            let mut spec = load(&common.config)?;
            if let Some(v) = variant {
                spec.run.variant = v;
            }
            if let Some(s) = seed {
                spec.run.seeds = vec![s];
            }
            if let Some(e) = events {
                spec.run.events = e;
            }
            if let Some(s) = stride {
                spec.run.stride = s;
            }
            if let Some(w) = window {
                spec.run.window = Some(w);
            }
            if let Some(h) = h {
                spec.run.h = h;
            }
            spec.check()?;
            let out = out_dir(&common, &spec);
            let summary = run_experiment(&spec, &out)?;
            for r in &summary.runs {
                println!(
                    "seed {:>6}  events {:>8}  max_abs_error {:.6}  consensus_spread {:.6}  clamp {:.4}",
                    r.seed, r.events, r.final_max_abs_error, r.final_consensus_spread, r.clamp_fraction
                );
                for w in &r.warnings {
                    eprintln!("warning (seed {}): {w}", r.seed);
                }
            }
            println!("wrote {}", out.display());
        }
        Command::AnalyzeMatrices { common, windows } => {
            let spec = load(&common.config)?;
            let out = out_dir(&common, &spec);
            let report = matrices_report(&spec.network.build()?, &windows)?;
            write_json(&out.join("matrices.json"), &report)?;
            if let Some(c) = report.contraction_factor {
                println!("contraction factor {c}");
            }
            for l in &report.lifted {
                println!(
                    "T = {:>4}  bound {:.6}  measured {:.6}  holds {}",
                    l.window, l.bound, l.measured, l.holds
                );
            }
            if !report.lifted_skipped.is_empty() {
                println!(
                    "lifted norm skipped for T in {:?} (too large for exact enumeration)",
                    report.lifted_skipped
                );
            }
            println!("wrote {}", out.join("matrices.json").display());
        }
        Command::Averaged {
            common,
            eps,
            m,
            events,
            stride,
            hull_samples,
        } => {
            let spec = load(&common.config)?;
            let out = out_dir(&common, &spec);
            let net = spec.network.build()?;
            let schedule = match eps {
                Some(eps) => EpsSchedule::Constant { eps },
                None => EpsSchedule::ChainInduced {
                    m,
                    t: spec.run.window.unwrap_or(1) as f64,
                },
            };
            let x0 = initial(&spec, net.n())?;
            let (trace, report) = averaged_run(&net, &x0, schedule, events, stride, hull_samples)?;
            write_csv(&out, |w| write_averaged_csv(&trace, w))?;
            write_json(&out.join("summary.json"), &report)?;
            println!(
                "final d_H {:e}  delta {:e}  delta+ estimate {:.4} (sample-based)",
                report.final_d_hilbert, report.delta, report.delta_plus_estimate
            );
            println!("wrote {}", out.display());
        }
        Command::ContractionReport {
            common,
            eps,
            trials,
            seed,
            sweep,
        } => {
            let spec = load(&common.config)?;
            let out = out_dir(&common, &spec);
            let report = contraction_summary(&spec.network.build()?, eps, trials, seed, sweep)?;
            write_json(&out.join("contraction.json"), &report)?;
            for c in &report.checks {
                println!(
                    "eta {:<5} eps {:<6} samples {:>4}  violations {}  min decrease {:e}",
                    c.eta, c.eps, c.samples, c.violations, c.min_decrease
                );
            }
            for s in &report.sweeps {
                println!(
                    "eta {:<5} largest clean eps {:?}",
                    s.eta, s.largest_clean_eps
                );
            }
            println!("wrote {}", out.join("contraction.json").display());
        }
    }
    Ok(())
}

fn write_csv(out: &Path, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join("trace.csv");
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    f(BufWriter::new(file))?;
    Ok(())
}
