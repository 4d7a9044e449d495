//! Tick-based simulation of the decentralized protocol.
//!
//! Time advances in ticks of length `h`. Agent `i` acts once per tick at its
//! offset `T_i ∈ [0, h)`; agents sharing an offset act together and see the
//! same aggregate. When the aggregate is below capacity an agent adds
//! `growth_i · h`. Otherwise it first folds its current share into its own
//! average, then backs off to `β_i x_i` with probability `λ_i` read at that
//! average, and adds `growth_i · h` if it does not back off.
//!
//! A tick in which any group sees the aggregate at or above capacity is one
//! capacity event. Its snapshot is the state at the start of the tick, divided
//! by `C`; snapshots are numbered `0, 1, …` and play the role of the chain
//! states `x(k)`. Record `k` carries the probabilities and decisions of event
//! `k - 1`, which produced snapshot `k`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Clamp, NetworkSpec};
use crate::simplex::l1_distance;
use crate::trace::{is_recorded, ClampCounts, Trace, TraceRecord};

/// Overshoot of the aggregate past capacity, relative to `C`, that triggers a
/// discretization warning.
pub const OVERSHOOT_WARNING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Averaging {
    LongTerm,
    Window { t: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentState {
    /// Current claim in capacity units.
    pub x: f64,
    /// Average of this agent's shares `x/C` over the events it observed.
    pub xbar: f64,
    pub offset: f64,
    pub events_seen: u64,
    #[serde(skip)]
    window: VecDeque<f64>,
    #[serde(skip)]
    window_sum: f64,
}

impl AgentState {
    fn new(x: f64, offset: f64) -> Self {
        Self {
            x,
            xbar: 0.0,
            offset,
            events_seen: 0,
            window: VecDeque::new(),
            window_sum: 0.0,
        }
    }

    /// Folds the share `r` into the averages and returns the value the drop
    /// probability is read at.
    fn observe(&mut self, r: f64, averaging: Averaging) -> f64 {
        self.events_seen += 1;
        self.xbar += (r - self.xbar) / self.events_seen as f64;
        match averaging {
            Averaging::LongTerm => self.xbar,
            Averaging::Window { t } => {
                if self.window.len() == t {
                    self.window_sum -= self.window.pop_front().unwrap_or(0.0);
                }
                self.window.push_back(r);
                self.window_sum += r;
                if self.events_seen.is_multiple_of(t.max(64) as u64) {
                    self.window_sum = self.window.iter().sum();
                }
                self.window_sum / self.window.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub spec: NetworkSpec,
    pub h: f64,
    /// Maximum number of ticks.
    pub steps: u64,
    /// Stop after this many events following the first one.
    pub max_events: Option<u64>,
    pub offsets: Vec<f64>,
    pub averaging: Averaging,
    pub stride: u64,
    /// Initial claims in capacity units; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl SimConfig {
    /// Zero offsets, long-term averaging, every event recorded, empty start.
    pub fn new(spec: NetworkSpec, h: f64, steps: u64) -> Self {
        let n = spec.n();
        Self {
            spec,
            h,
            steps,
            max_events: None,
            offsets: vec![0.0; n],
            averaging: Averaging::LongTerm,
            stride: 1,
            x0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.spec.n();
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step h = {} must be positive",
                self.h
            )));
        }
        if self.offsets.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.offsets.len(),
            });
        }
        if let Some(o) = self.offsets.iter().find(|o| !(**o >= 0.0 && **o < self.h)) {
            return Err(Error::InvalidParameter(format!(
                "offset {o} outside [0, h)"
            )));
        }
        if let Averaging::Window { t: 0 } = self.averaging {
            return Err(Error::InvalidParameter(
                "window length must be at least one".into(),
            ));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: x0.len(),
                });
            }
            if x0.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter(
                    "initial claims must be nonnegative".into(),
                ));
            }
        }
        if !(self.spec.capacity() > 0.0) {
            return Err(Error::InvalidParameter("capacity must be positive".into()));
        }
        Ok(())
    }
}

pub fn detect_capacity_event(states: &[f64], capacity: f64) -> bool {
    states.iter().sum::<f64>() >= capacity
}

/// Agent indices grouped by offset, groups in increasing offset order.
fn offset_groups(offsets: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..offsets.len()).collect();
    idx.sort_by(|a, b| offsets[*a].total_cmp(&offsets[*b]).then(a.cmp(b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if offsets[g[0]] == offsets[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

pub fn run_agent_simulation(config: &SimConfig, seed: u64) -> Result<Trace> {
    config.validate()?;
    let spec = &config.spec;
    let n = spec.n();
    let c = spec.capacity();
    let rules = spec.rules();
    let growth = spec.growth();
    let beta = spec.beta();
    let groups = offset_groups(&config.offsets);
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut agents: Vec<AgentState> = x0
        .iter()
        .zip(&config.offsets)
        .map(|(x, o)| AgentState::new(*x, *o))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut clamps = ClampCounts::default();
    let mut lambda = vec![0.0; n];
    let mut dropped = vec![false; n];
    let mut prev_lambda = vec![0.0; n];
    let mut prev_dropped = vec![false; n];
    let mut snapshot = vec![0.0; n];
    let mut initial: Option<Vec<f64>> = None;
    let mut records = Vec::new();
    let mut event: Option<u64> = None;
    let mut unrecorded: Option<TraceRecord> = None;
    let mut overshoots = 0u64;
    let mut worst_overshoot = 0.0_f64;

    for tick in 0..config.steps {
        if let (Some(e), Some(m)) = (event, config.max_events) {
            if e >= m {
                break;
            }
        }
        let mut raised = false;
        for g in &groups {
            let total: f64 = agents.iter().map(|a| a.x).sum();
            if total >= c {
                if !raised {
                    raised = true;
                    for (s, a) in snapshot.iter_mut().zip(&agents) {
                        *s = a.x / c;
                    }
                    let over = total / c - 1.0;
                    if over > OVERSHOOT_WARNING {
                        overshoots += 1;
                        worst_overshoot = worst_overshoot.max(over);
                    }
                    lambda.iter_mut().for_each(|l| *l = 0.0);
                    dropped.iter_mut().for_each(|d| *d = false);
                }
                for &i in g {
                    let a = &mut agents[i];
                    let r = a.observe(a.x / c, config.averaging);
                    let (l, clamp) = rules[i].evaluate(r);
                    clamps.evaluations += 1;
                    match clamp {
                        Clamp::Floor => clamps.floor += 1,
                        Clamp::Ceiling => clamps.ceiling += 1,
                        Clamp::None => {}
                    }
                    lambda[i] = l;
                    let u: f64 = rng.gen();
                    if u < l {
                        a.x *= beta[i];
                        dropped[i] = true;
                    } else {
                        a.x += growth[i] * config.h;
                    }
                }
            } else {
                for &i in g {
                    agents[i].x += growth[i] * config.h;
                }
            }
        }
        if raised {
            let e = event.map_or(0, |e| e + 1);
            event = Some(e);
            if e == 0 {
                initial = Some(snapshot.clone());
            } else {
                let rec = TraceRecord {
                    event: e,
                    x: snapshot.clone(),
                    xbar: agents.iter().map(|a| a.xbar).collect(),
                    lambda: prev_lambda.clone(),
                    dropped: prev_dropped.clone(),
                    window_average: None,
                    wallclock_step: Some(tick),
                };
                if is_recorded(e, config.stride, 0) {
                    records.push(rec);
                    unrecorded = None;
                } else {
                    unrecorded = Some(rec);
                }
            }
            std::mem::swap(&mut prev_lambda, &mut lambda);
            std::mem::swap(&mut prev_dropped, &mut dropped);
        }
    }
    let events = event.unwrap_or(0);
    // The final event is kept even when the stride skips it.
    records.extend(unrecorded);
    let mut warnings = Vec::new();
    if overshoots > 0 {
        warnings.push(format!(
            "{overshoots} capacity events overshot C by more than {:.0}% (worst {:.3}); h is too coarse",
            OVERSHOOT_WARNING * 100.0,
            worst_overshoot
        ));
    }
    if event.is_none() {
        warnings.push("no capacity event occurred within the horizon".into());
    }
    Ok(Trace {
        variant: "agent".into(),
        initial: initial.unwrap_or_else(|| agents.iter().map(|a| a.x / c).collect()),
        records,
        events,
        time_average: agents.iter().map(|a| a.xbar).collect(),
        renormalizations: 0,
        clamps,
        sbar: Vec::new(),
        warnings,
    })
}

/// Runs the simulation for `events` events after the first and replays its
/// drop decisions through the matrix chain started at the normalized first
/// snapshot. Returns the largest 1-norm gap between the snapshots `x/C` and
/// the chain states.
pub fn event_to_matrix_residual(config: &SimConfig, seed: u64, events: u64) -> Result<f64> {
    if events == 0 {
        return Ok(0.0);
    }
    let mut cfg = config.clone();
    cfg.max_events = Some(events);
    cfg.stride = 1;
    let trace = run_agent_simulation(&cfg, seed)?;
    if trace.records.is_empty() {
        return Ok(0.0);
    }
    let params = config.spec.aimd_params()?;
    let total: f64 = trace.initial.iter().sum();
    let mut y: Vec<f64> = trace.initial.iter().map(|v| v / total).collect();
    let mut worst = l1_distance(&trace.initial, &y);
    for rec in &trace.records {
        params.apply_pattern(&rec.dropped, &mut y);
        worst = worst.max(l1_distance(&rec.x, &y));
    }
    Ok(worst)
}
