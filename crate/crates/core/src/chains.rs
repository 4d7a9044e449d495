//! The three stochastic chains on the simplex.
//!
//! * fixed: drop probabilities are constants, patterns are IID;
//! * window: agent `i` drops with probability `λ_i` evaluated at its own
//!   coordinate of the mean of the last `T` states (fewer during warm-up);
//! * long-term: as above with the mean of all states visited so far.
//!
//! Random stream order is fixed: one uniform draw per agent per event, agents
//! in ascending index order, and agent `i` drops iff its draw is below `λ_i`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::{AimdParams, DropPattern};
use crate::problem::{Clamp, NetworkSpec, ProbabilityRule};
use crate::simplex::SimplexPoint;
use crate::trace::{is_recorded, ClampCounts, SbarPoint, Trace, TraceRecord};

/// Drift of `eᵀx` from one beyond which the state is renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Largest `n` for which the product average `S̄(k)` may be accumulated.
pub const SBAR_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "variant")]
pub enum ChainVariant {
    Fixed { lambda: Vec<f64> },
    Window { t: usize },
    LongTerm,
}

impl ChainVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ChainVariant::Fixed { .. } => "fixed",
            ChainVariant::Window { .. } => "window",
            ChainVariant::LongTerm => "longterm",
        }
    }
}

/// The last `T` states and their running sum.
#[derive(Debug, Clone, PartialEq)]
struct WindowBuffer {
    t: usize,
    states: VecDeque<Vec<f64>>,
    sum: Vec<f64>,
    since_refresh: usize,
}

impl WindowBuffer {
    fn new(t: usize, x0: &[f64]) -> Self {
        let mut states = VecDeque::with_capacity(t);
        states.push_back(x0.to_vec());
        Self {
            t,
            states,
            sum: x0.to_vec(),
            since_refresh: 0,
        }
    }

    fn push(&mut self, x: &[f64]) {
        let reuse = if self.states.len() == self.t {
            self.states.pop_front()
        } else {
            None
        };
        if let Some(old) = &reuse {
            for (s, o) in self.sum.iter_mut().zip(old) {
                *s -= o;
            }
        }
        let mut slot = reuse.unwrap_or_else(|| vec![0.0; x.len()]);
        slot.copy_from_slice(x);
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += v;
        }
        self.states.push_back(slot);
        // Rebuild the sum periodically so rounding does not accumulate.
        self.since_refresh += 1;
        if self.since_refresh >= self.t.max(64) {
            self.since_refresh = 0;
            self.sum.iter_mut().for_each(|s| *s = 0.0);
            for st in &self.states {
                for (s, v) in self.sum.iter_mut().zip(st) {
                    *s += v;
                }
            }
        }
    }

    fn average_into(&self, out: &mut [f64]) {
        let len = self.states.len() as f64;
        for (o, s) in out.iter_mut().zip(&self.sum) {
            *o = s / len;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    x: Vec<f64>,
    xbar: Vec<f64>,
    k: u64,
    window: Option<WindowBuffer>,
    lambda: Vec<f64>,
    drops: Vec<bool>,
    scratch: Vec<f64>,
    renormalizations: u64,
    clamps: ClampCounts,
}

impl ChainState {
    pub fn new(x0: &SimplexPoint) -> Self {
        let n = x0.len();
        Self {
            x: x0.as_slice().to_vec(),
            xbar: x0.as_slice().to_vec(),
            k: 0,
            window: None,
            lambda: vec![0.0; n],
            drops: vec![false; n],
            scratch: vec![0.0; n],
            renormalizations: 0,
            clamps: ClampCounts::default(),
        }
    }

    /// State that also keeps the mean of the last `t` states.
    pub fn with_window(x0: &SimplexPoint, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter(
                "window length must be at least one".into(),
            ));
        }
        let mut s = Self::new(x0);
        s.window = Some(WindowBuffer::new(t, x0.as_slice()));
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Mean of `x(0), …, x(k)`.
    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    /// Number of events taken.
    pub fn k(&self) -> u64 {
        self.k
    }

    /// Mean of the last `min(k+1, T)` states, if a window is kept.
    pub fn window_average(&self) -> Option<Vec<f64>> {
        self.window.as_ref().map(|w| {
            let mut v = vec![0.0; self.x.len()];
            w.average_into(&mut v);
            v
        })
    }

    /// Probabilities used by the most recent event.
    pub fn last_lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Drop decisions of the most recent event.
    pub fn last_drops(&self) -> &[bool] {
        &self.drops
    }

    pub fn renormalizations(&self) -> u64 {
        self.renormalizations
    }

    pub fn clamp_counts(&self) -> ClampCounts {
        self.clamps
    }

    fn set_lambda_from_rules(&mut self, rules: &[ProbabilityRule], at: &[f64]) {
        for ((l, rule), r) in self.lambda.iter_mut().zip(rules).zip(at) {
            let (v, c) = rule.evaluate(*r);
            *l = v;
            self.clamps.evaluations += 1;
            match c {
                Clamp::Floor => self.clamps.floor += 1,
                Clamp::Ceiling => self.clamps.ceiling += 1,
                Clamp::None => {}
            }
        }
    }

    /// Draws the pattern from `self.lambda`, applies it and updates averages.
    fn advance<R: Rng + ?Sized>(&mut self, params: &AimdParams, rng: &mut R) {
        sample_into(rng, &self.lambda, &mut self.drops);
        params.apply_pattern(&self.drops, &mut self.x);
        let s: f64 = self.x.iter().sum();
        if (s - 1.0).abs() > RENORMALIZE_TOL {
            self.x.iter_mut().for_each(|v| *v /= s);
            self.renormalizations += 1;
        }
        self.k += 1;
        let w = 1.0 / (self.k as f64 + 1.0);
        for (b, v) in self.xbar.iter_mut().zip(&self.x) {
            *b += w * (v - *b);
        }
        if let Some(win) = &mut self.window {
            win.push(&self.x);
        }
    }
}

fn sample_into<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], out: &mut [bool]) {
    for (o, p) in out.iter_mut().zip(probs) {
        let u: f64 = rng.gen();
        *o = u < *p;
    }
}

/// Independent Bernoulli draws, one per agent in index order.
pub fn sample_drop_pattern<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> DropPattern {
    let mut out = vec![false; probs.len()];
    sample_into(rng, probs, &mut out);
    DropPattern::new(out)
}

pub fn step_fixed_chain<R: Rng + ?Sized>(
    state: &mut ChainState,
    rng: &mut R,
    lambda: &[f64],
    params: &AimdParams,
) {
    state.lambda.copy_from_slice(lambda);
    state.advance(params, rng);
}

/// One event with probabilities read at the window average. Requires a state
/// built with [`ChainState::with_window`].
pub fn step_window_chain<R: Rng + ?Sized>(
    state: &mut ChainState,
    rng: &mut R,
    rules: &[ProbabilityRule],
    params: &AimdParams,
) -> Result<()> {
    let win = state
        .window
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("state keeps no window".into()))?;
    let mut avg = std::mem::take(&mut state.scratch);
    win.average_into(&mut avg);
    state.set_lambda_from_rules(rules, &avg);
    state.scratch = avg;
    state.advance(params, rng);
    Ok(())
}

/// One event with probabilities read at the running mean of all states.
pub fn step_longterm_chain<R: Rng + ?Sized>(
    state: &mut ChainState,
    rng: &mut R,
    rules: &[ProbabilityRule],
    params: &AimdParams,
) {
    let avg = std::mem::take(&mut state.xbar);
    state.set_lambda_from_rules(rules, &avg);
    state.xbar = avg;
    state.advance(params, rng);
}

/// Limit of the fixed chain's running mean: entries proportional to
/// `α_i / (λ_i (1 - β_i))`.
pub fn xi_lambda(lambda: &[f64], params: &AimdParams) -> Result<SimplexPoint> {
    if lambda.len() != params.n() {
        return Err(Error::Dimension {
            expected: params.n(),
            got: lambda.len(),
        });
    }
    if let Some(i) = lambda.iter().position(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "lambda[{i}] = {} must be positive",
            lambda[i]
        )));
    }
    let w = lambda
        .iter()
        .zip(params.alpha().as_slice())
        .zip(params.beta())
        .map(|((l, a), b)| a / (l * (1.0 - b)))
        .collect();
    SimplexPoint::from_weights(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub events: u64,
    pub stride: u64,
    pub seed: u64,
    /// Events at which `‖S̄(k) - ξ_λ eᵀ‖₁` is reported (fixed chain, small n).
    #[serde(default)]
    pub sbar_checkpoints: Vec<u64>,
}

impl RunConfig {
    pub fn new(events: u64, stride: u64, seed: u64) -> Self {
        Self {
            events,
            stride,
            seed,
            sbar_checkpoints: Vec::new(),
        }
    }
}

/// Running product `Π(k) = A(k-1)⋯A(0)` and the sum of `Π(0), …, Π(k)`,
/// stored by columns.
struct SbarAccumulator {
    xi: Vec<f64>,
    product: Vec<Vec<f64>>,
    sum: Vec<Vec<f64>>,
}

impl SbarAccumulator {
    fn new(xi: Vec<f64>) -> Self {
        let n = xi.len();
        let product: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let sum = product.clone();
        Self { xi, product, sum }
    }

    fn push(&mut self, params: &AimdParams, drops: &[bool]) {
        for (col, acc) in self.product.iter_mut().zip(self.sum.iter_mut()) {
            params.apply_pattern(drops, col);
            for (a, v) in acc.iter_mut().zip(col.iter()) {
                *a += v;
            }
        }
    }

    /// Induced 1-norm, i.e. the largest column 1-norm.
    fn distance(&self, k: u64) -> f64 {
        let scale = 1.0 / (k as f64 + 1.0);
        self.sum
            .iter()
            .map(|col| {
                col.iter()
                    .zip(&self.xi)
                    .map(|(s, x)| (s * scale - x).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

fn record(state: &ChainState, event: u64) -> TraceRecord {
    TraceRecord {
        event,
        x: state.x.clone(),
        xbar: state.xbar.clone(),
        lambda: state.lambda.clone(),
        dropped: state.drops.clone(),
        window_average: state.window_average(),
        wallclock_step: None,
    }
}

fn finish(
    state: ChainState,
    variant: &str,
    initial: Vec<f64>,
    records: Vec<TraceRecord>,
    sbar: Vec<SbarPoint>,
) -> Trace {
    Trace {
        variant: variant.to_string(),
        initial,
        records,
        events: state.k,
        time_average: state.xbar,
        renormalizations: state.renormalizations,
        clamps: state.clamps,
        sbar,
        warnings: Vec::new(),
    }
}

pub fn run_fixed_chain(
    params: &AimdParams,
    lambda: &[f64],
    x0: &SimplexPoint,
    cfg: &RunConfig,
) -> Result<Trace> {
    let n = params.n();
    if lambda.len() != n || x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if lambda.len() != n {
                lambda.len()
            } else {
                x0.len()
            },
        });
    }
    if let Some(p) = lambda.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    let mut sbar = if cfg.sbar_checkpoints.is_empty() {
        None
    } else if n > SBAR_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "S̄ accumulation is limited to n ≤ {SBAR_MAX_N}"
        )));
    } else {
        Some(SbarAccumulator::new(xi_lambda(lambda, params)?.into_vec()))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState::new(x0);
    let mut records = Vec::new();
    let mut sbar_points = Vec::new();
    for e in 1..=cfg.events {
        step_fixed_chain(&mut state, &mut rng, lambda, params);
        if let Some(acc) = &mut sbar {
            acc.push(params, &state.drops);
            if cfg.sbar_checkpoints.contains(&e) {
                sbar_points.push(SbarPoint {
                    event: e,
                    distance: acc.distance(e),
                });
            }
        }
        if is_recorded(e, cfg.stride, cfg.events) {
            records.push(record(&state, e));
        }
    }
    Ok(finish(
        state,
        "fixed",
        x0.as_slice().to_vec(),
        records,
        sbar_points,
    ))
}

fn check_spec(spec: &NetworkSpec, x0: &SimplexPoint) -> Result<AimdParams> {
    if x0.len() != spec.n() {
        return Err(Error::Dimension {
            expected: spec.n(),
            got: x0.len(),
        });
    }
    spec.aimd_params()
}

pub fn run_window_chain(
    spec: &NetworkSpec,
    t: usize,
    x0: &SimplexPoint,
    cfg: &RunConfig,
) -> Result<Trace> {
    let params = check_spec(spec, x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState::with_window(x0, t)?;
    let mut records = Vec::new();
    for e in 1..=cfg.events {
        step_window_chain(&mut state, &mut rng, spec.rules(), &params)?;
        if is_recorded(e, cfg.stride, cfg.events) {
            records.push(record(&state, e));
        }
    }
    Ok(finish(
        state,
        "window",
        x0.as_slice().to_vec(),
        records,
        Vec::new(),
    ))
}

pub fn run_longterm_chain(spec: &NetworkSpec, x0: &SimplexPoint, cfg: &RunConfig) -> Result<Trace> {
    let params = check_spec(spec, x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState::new(x0);
    let mut records = Vec::new();
    for e in 1..=cfg.events {
        step_longterm_chain(&mut state, &mut rng, spec.rules(), &params);
        if is_recorded(e, cfg.stride, cfg.events) {
            records.push(record(&state, e));
        }
    }
    Ok(finish(
        state,
        "longterm",
        x0.as_slice().to_vec(),
        records,
        Vec::new(),
    ))
}

/// Dispatches on the variant; the fixed variant ignores the spec's rules.
pub fn run_chain(
    spec: &NetworkSpec,
    variant: &ChainVariant,
    x0: &SimplexPoint,
    cfg: &RunConfig,
) -> Result<Trace> {
    match variant {
        ChainVariant::Fixed { lambda } => run_fixed_chain(&spec.aimd_params()?, lambda, x0, cfg),
        ChainVariant::Window { t } => run_window_chain(spec, *t, x0, cfg),
        ChainVariant::LongTerm => run_longterm_chain(spec, x0, cfg),
    }
}
