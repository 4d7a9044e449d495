//! Distributed network utility maximization driven by AIMD drop decisions.
//!
//! Agents share a capacity `C`. Each one grows its claim additively and, when
//! the aggregate reaches `C`, backs off multiplicatively with a probability
//! computed from its own averaged share and its cost derivative. The running
//! averages converge to the minimizer of `Σ f_i(x_i)` subject to `Σ x_i = C`.
//!
//! * [`problem`]: costs, probability rules, network specs and their checks;
//! * [`matrices`]: the AIMD matrix family, lifts and contraction constants;
//! * [`kkt`]: reference solutions;
//! * [`chains`]: fixed, window and long-term chains on the simplex;
//! * [`agentsim`]: tick-based simulation of the protocol itself;
//! * [`averaged`]: the deterministic averaged system and Hilbert-metric checks;
//! * [`generator`], [`metrics`], [`trace`]: instances and run records.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agentsim;
pub mod averaged;
pub mod bisect;
pub mod chains;
pub mod error;
pub mod generator;
pub mod kkt;
pub mod matrices;
pub mod metrics;
pub mod problem;
pub mod simplex;
pub mod trace;

pub use agentsim::{Averaging, SimConfig};
pub use averaged::{EpsSchedule, HilbertPair, PHull};
pub use chains::{ChainState, ChainVariant, RunConfig};
pub use error::{Error, Result};
pub use generator::GeneratorParams;
pub use kkt::{KktSolution, PFixedPoint};
pub use matrices::{AimdMatrix, AimdParams, DropPattern, LiftedMatrix};
pub use metrics::MetricSeries;
pub use problem::{CostFunction, CostKind, NetworkSpec, ProbabilityRule};
pub use simplex::SimplexPoint;
pub use trace::{ClampCounts, Trace, TraceRecord};
