//! Experiment configuration files.
//!
//! A config is TOML with three tables:
//!
//! ```toml
//! [network]
//! generator = "random"     # or "explicit" with [[network.agents]] entries
//! n = 150
//! coeff_max = 100.0
//! gamma_inverse = 1300.0   # or gamma = 7.7e-4
//! seed = 6
//!
//! [run]
//! variant = "longterm"     # fixed | window | longterm | agent
//! window = 500
//! events = 200000
//! seeds = [1, 2, 3]
//! stride = 1000
//!
//! [output]
//! dir = "runs/default"
//! ```
//!
//! Every key except `network.n` (random) or `network.agents` (explicit) has
//! a default; see the field docs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use aimd_core::problem::{
    validate_network_spec, CostFunction, CostKind, NetworkSpec, ProbabilityRule, DEFAULT_FLOOR,
};
use aimd_core::GeneratorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fixed,
    Window,
    Longterm,
    Agent,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Fixed => "fixed",
            Variant::Window => "window",
            Variant::Longterm => "longterm",
            Variant::Agent => "agent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Random,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub kind: CostKind,
    pub coefficients: Vec<f64>,
    /// Degrees matching `coefficients`; only for `kind = "monomials"`.
    #[serde(default)]
    pub degrees: Vec<u32>,
    pub growth: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub generator: GeneratorKind,
    /// Agent count for the random generator.
    pub n: Option<usize>,
    /// Coefficients are uniform on `(0, coeff_max]`. Default 100.
    #[serde(default = "d_coeff_max")]
    pub coeff_max: f64,
    /// Families drawn by the random generator. Default: all four.
    pub families: Option<Vec<CostKind>>,
    /// Generator seed. Default 0.
    #[serde(default)]
    pub seed: u64,
    pub gamma: Option<f64>,
    /// Alternative to `gamma`: its reciprocal.
    pub gamma_inverse: Option<f64>,
    /// Default 1.
    #[serde(default = "d_one")]
    pub capacity: f64,
    /// Default 0.01.
    #[serde(default = "d_growth")]
    pub growth: f64,
    /// Default 0.85.
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Lower clamp of the drop probabilities. Default 1e-6.
    #[serde(default = "d_floor")]
    pub floor: f64,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub variant: Variant,
    /// Window length for the window variant (and windowed agent averaging).
    pub window: Option<usize>,
    pub events: u64,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    /// Record every `stride`-th event. Default 1000.
    #[serde(default = "d_stride")]
    pub stride: u64,
    /// Initial shares; uniform when absent.
    pub x0: Option<Vec<f64>>,
    /// Drop probabilities of the fixed variant; `λ_i(x*_i)` when absent.
    pub lambda: Option<Vec<f64>>,
    /// Tick length of the agent simulation. Default 1e-3.
    #[serde(default = "d_h")]
    pub h: f64,
    /// Tick budget of the agent simulation. Default unlimited.
    pub max_ticks: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub network: NetworkSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn d_coeff_max() -> f64 {
    100.0
}
fn d_one() -> f64 {
    1.0
}
fn d_growth() -> f64 {
    0.01
}
fn d_beta() -> f64 {
    0.85
}
fn d_floor() -> f64 {
    DEFAULT_FLOOR
}
fn d_seeds() -> Vec<u64> {
    vec![0]
}
fn d_stride() -> u64 {
    1000
}
fn d_h() -> f64 {
    1e-3
}

/// The bundled configuration with the published experiment parameters.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        toml::from_str(text).map_err(|e| anyhow::anyhow!("malformed config: {e}"))?;
    spec.check()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in {}", path.display()))
}

impl NetworkSection {
    pub fn gamma(&self) -> Result<f64> {
        match (self.gamma, self.gamma_inverse) {
            (Some(g), None) => Ok(g),
            (None, Some(inv)) if inv > 0.0 => Ok(1.0 / inv),
            (None, Some(inv)) => bail!("gamma_inverse {inv} must be positive"),
            (Some(_), Some(_)) => bail!("set either gamma or gamma_inverse, not both"),
            (None, None) => bail!("network needs gamma or gamma_inverse"),
        }
    }

    /// Builds the network without checking the standing assumptions.
    pub fn build_unchecked(&self) -> Result<NetworkSpec> {
        let gamma = self.gamma()?;
        match self.generator {
            GeneratorKind::Random => {
                let n = self.n.context("random generator needs network.n")?;
                let params = GeneratorParams {
                    n,
                    coeff_max: self.coeff_max,
                    gamma,
                    capacity: self.capacity,
                    floor: self.floor,
                    growth: self.growth,
                    beta: self.beta,
                    families: self
                        .families
                        .clone()
                        .unwrap_or_else(|| CostKind::FAMILIES.to_vec()),
                };
                Ok(params.generate(self.seed)?)
            }
            GeneratorKind::Explicit => {
                if self.agents.is_empty() {
                    bail!("explicit generator needs at least one [[network.agents]] entry");
                }
                let mut rules = Vec::new();
                let mut growth = Vec::new();
                let mut beta = Vec::new();
                for (i, a) in self.agents.iter().enumerate() {
                    let cost = if a.kind == CostKind::Monomials {
                        if a.degrees.len() != a.coefficients.len() {
                            bail!("agent {i}: degrees and coefficients differ in length");
                        }
                        let terms: Vec<(f64, u32)> = a
                            .coefficients
                            .iter()
                            .copied()
                            .zip(a.degrees.iter().copied())
                            .collect();
                        CostFunction::monomials(&terms)
                    } else {
                        CostFunction::from_kind(a.kind, &a.coefficients)
                    }
                    .with_context(|| format!("agent {i}"))?;
                    rules.push(ProbabilityRule::with_params(
                        cost,
                        gamma,
                        self.floor,
                        self.capacity,
                    )?);
                    growth.push(a.growth.unwrap_or(self.growth));
                    beta.push(a.beta.unwrap_or(self.beta));
                }
                Ok(NetworkSpec::new(self.capacity, rules, growth, beta)?)
            }
        }
    }

    /// Builds the network and rejects it if any assumption is violated.
    pub fn build(&self) -> Result<NetworkSpec> {
        let spec = self.build_unchecked()?;
        let report = validate_network_spec(&spec);
        if !report.is_valid() {
            bail!("network violates its assumptions:\n{report}");
        }
        Ok(spec)
    }
}

impl ExperimentSpec {
    /// Structural checks that do not need the network.
    pub fn check(&self) -> Result<()> {
        if self.run.events < 1 {
            bail!("run.events must be at least 1");
        }
        if self.run.seeds.is_empty() {
            bail!("run.seeds must not be empty");
        }
        if self.run.variant == Variant::Window && self.run.window.unwrap_or(0) < 1 {
            bail!("the window variant needs run.window ≥ 1");
        }
        if self.run.window == Some(0) {
            bail!("run.window must be at least 1");
        }
        self.network.gamma()?;
        Ok(())
    }
}
