//! The deterministic averaged system `x ← (1-ε)x + εP(x)` with
//! `P(x)_i ∝ 1/λ_i(x_i)`, the Hilbert projective metric and empirical
//! contraction diagnostics.
//!
//! `conv P(Σ)` is approximated by the hull of `P` at a deterministic sample of
//! `Σ`: the vertices, the barycenter and Halton points pushed through
//! `-ln u` and normalized. Hull distances are certified only up to that
//! sampling resolution, and the `δ⁺` value is an estimate over the same
//! sample.

use std::io::Write;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{solve_p_fixed_point, DEFAULT_TOL};
use crate::problem::ProbabilityRule;
use crate::simplex::{l1_distance, SimplexPoint};

/// Default number of simplex samples for the hull.
pub const DEFAULT_HULL_SAMPLES: usize = 512;

fn check_len(rules: &[ProbabilityRule], x: &[f64]) -> Result<()> {
    if rules.len() != x.len() {
        return Err(Error::Dimension {
            expected: rules.len(),
            got: x.len(),
        });
    }
    Ok(())
}

pub fn p_map(rules: &[ProbabilityRule], x: &[f64]) -> Result<SimplexPoint> {
    check_len(rules, x)?;
    let mut inv = Vec::with_capacity(x.len());
    for (i, (rule, xi)) in rules.iter().zip(x).enumerate() {
        let l = rule.lambda(*xi);
        if !(l > 0.0) {
            return Err(Error::FloorViolation { agent: i, value: l });
        }
        inv.push(1.0 / l);
    }
    let p = SimplexPoint::from_weights(inv)?;
    #[cfg(debug_assertions)]
    {
        let floor = rules.iter().map(|r| r.floor()).fold(1.0, f64::min);
        let n = x.len() as f64;
        if floor > 0.0 {
            for v in p.as_slice() {
                debug_assert!(
                    *v >= floor / n * (1.0 - 1e-12)
                        && *v <= (1.0 / (n * floor)).min(1.0) * (1.0 + 1e-12)
                );
            }
        }
    }
    Ok(p)
}

pub fn r_eps(rules: &[ProbabilityRule], x: &[f64], eps: f64) -> Result<SimplexPoint> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps {eps} outside [0, 1]")));
    }
    let p = p_map(rules, x)?;
    let y = x
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (1.0 - eps) * a + eps * b)
        .collect();
    SimplexPoint::from_weights(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "schedule")]
pub enum EpsSchedule {
    Constant {
        eps: f64,
    },
    /// `ε_k = m / (T + (k+1) m + 1)`.
    ChainInduced {
        m: f64,
        t: f64,
    },
}

impl EpsSchedule {
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            EpsSchedule::Constant { eps } => eps,
            EpsSchedule::ChainInduced { m, t } => m / (t + (k as f64 + 1.0) * m + 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsSchedule::Constant { eps } if !(eps > 0.0 && eps < 1.0) => Err(
                Error::InvalidParameter(format!("constant eps {eps} outside (0, 1)")),
            ),
            EpsSchedule::ChainInduced { m, t } if !(m > 0.0 && t >= 0.0) => {
                Err(Error::InvalidParameter(format!(
                    "schedule needs m > 0 and T ≥ 0, got m = {m}, T = {t}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilbertPair {
    pub d: f64,
    pub ratio: f64,
}

/// `max_i ln(x_i/y_i) - min_j ln(x_j/y_j)` over the common support; `+∞` when
/// exactly one of the two vanishes at some coordinate.
pub fn hilbert_distance(x: &[f64], y: &[f64]) -> HilbertPair {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (a, b) in x.iter().zip(y) {
        match (*a > 0.0, *b > 0.0) {
            (true, true) => {
                let l = (a / b).ln();
                hi = hi.max(l);
                lo = lo.min(l);
            }
            (false, false) => {}
            _ => {
                return HilbertPair {
                    d: f64::INFINITY,
                    ratio: f64::INFINITY,
                }
            }
        }
    }
    let d = if hi >= lo { hi - lo } else { 0.0 };
    HilbertPair { d, ratio: d.exp() }
}

/// `ln(1 + Ĉ ε/(1-ε))` with `Ĉ = 1/min_i x*_i`: the most a convex step of
/// weight `ε` toward any point can increase the Hilbert distance to `x*`.
pub fn perturbation_bound(x_star: &SimplexPoint, eps: f64) -> f64 {
    let c_hat = 1.0 / x_star.min_coord();
    (1.0 + c_hat * eps / (1.0 - eps)).ln()
}

fn primes(count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out
            .iter()
            .take_while(|p| *p * *p <= c)
            .all(|p| !c.is_multiple_of(*p))
        {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Vertices, barycenter, then Halton points mapped onto the simplex.
pub fn simplex_samples(n: usize, samples: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || samples < n + 1 {
        return Err(Error::InvalidParameter(format!(
            "a hull sample needs at least n + 1 = {} points, got {samples}",
            n + 1
        )));
    }
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|i| SimplexPoint::vertex(n, i).into_vec())
        .collect();
    pts.push(SimplexPoint::uniform(n).into_vec());
    let bases = primes(n);
    let mut idx = 1u64;
    while pts.len() < samples {
        let w: Vec<f64> = bases
            .iter()
            .map(|b| -radical_inverse(idx, *b).ln())
            .collect();
        idx += 1;
        if w.iter().all(|v| v.is_finite()) {
            pts.push(SimplexPoint::from_weights(w)?.into_vec());
        }
    }
    Ok(pts)
}

/// Sampled image `P(Σ)` with the ball radius and the `δ⁺` estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PHull {
    pub points: Vec<Vec<f64>>,
    /// Radius of the ball added to the hull.
    pub delta: f64,
    /// `max` over the simplex sample of the distance to the nearest sampled
    /// `P` point. Sample-based; may under-estimate the true value.
    pub delta_plus_estimate: f64,
}

impl PHull {
    /// Samples with the default radius `0.5 · min` over samples of `min_i P_i`.
    pub fn sample(rules: &[ProbabilityRule], samples: usize) -> Result<Self> {
        let xs = simplex_samples(rules.len(), samples)?;
        let points = xs
            .iter()
            .map(|x| p_map(rules, x).map(SimplexPoint::into_vec))
            .collect::<Result<Vec<_>>>()?;
        let delta = 0.5
            * points
                .iter()
                .flat_map(|p| p.iter().copied())
                .fold(f64::INFINITY, f64::min);
        let delta_plus_estimate = xs
            .iter()
            .map(|y| {
                points
                    .iter()
                    .map(|p| l1_distance(y, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            points,
            delta,
            delta_plus_estimate,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// 1-norm distance from `x` to the hull of the sampled points.
    pub fn hull_distance(&self, x: &[f64]) -> Result<f64> {
        let n = x.len();
        if self.points.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension {
                expected: self.points[0].len(),
                got: n,
            });
        }
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let w: Vec<_> = self
            .points
            .iter()
            .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
            .collect();
        let t: Vec<_> = (0..n)
            .map(|_| lp.add_var(1.0, (0.0, f64::INFINITY)))
            .collect();
        for i in 0..n {
            let above: Vec<_> = w
                .iter()
                .zip(&self.points)
                .map(|(v, p)| (*v, p[i]))
                .chain([(t[i], 1.0)])
                .collect();
            lp.add_constraint(above.as_slice(), ComparisonOp::Ge, x[i]);
            let below: Vec<_> = w
                .iter()
                .zip(&self.points)
                .map(|(v, p)| (*v, -p[i]))
                .chain([(t[i], 1.0)])
                .collect();
            lp.add_constraint(below.as_slice(), ComparisonOp::Ge, -x[i]);
        }
        let sum: Vec<_> = w.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(sum.as_slice(), ComparisonOp::Eq, 1.0);
        let sol = lp
            .solve()
            .map_err(|e| Error::LinearProgram(e.to_string()))?;
        Ok(sol.objective().max(0.0))
    }

    /// Distance from `x` to the hull enlarged by the `δ`-ball.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok((self.hull_distance(x)? - self.delta).max(0.0))
    }
}

/// `dist₁(x, conv P(sample) + B(δ))` together with the `δ⁺` estimate.
pub fn dist_to_p_hull(
    x: &[f64],
    rules: &[ProbabilityRule],
    delta: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    check_len(rules, x)?;
    let hull = PHull::sample(rules, samples)?.with_delta(delta);
    Ok((hull.distance(x)?, hull.delta_plus_estimate))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedRecord {
    pub step: u64,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eps: f64,
    pub d_hilbert: f64,
    pub dist_hull: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedTrace {
    pub fixed_point: SimplexPoint,
    pub records: Vec<AveragedRecord>,
    pub delta_plus_estimate: Option<f64>,
}

/// Runs `k` steps from `x0`, recording step 0, every `stride`-th step and the
/// last one. Hull distances are computed at recorded steps when `hull` is set.
pub fn iterate_averaged(
    rules: &[ProbabilityRule],
    x0: &SimplexPoint,
    schedule: EpsSchedule,
    k: u64,
    stride: u64,
    hull: Option<&PHull>,
) -> Result<AveragedTrace> {
    check_len(rules, x0.as_slice())?;
    schedule.validate()?;
    let star = solve_p_fixed_point(rules, DEFAULT_TOL)?.point;
    let mut x = x0.as_slice().to_vec();
    let mut records = Vec::new();
    let rec = |step: u64, x: &[f64], eps: f64| -> Result<AveragedRecord> {
        Ok(AveragedRecord {
            step,
            x: x.to_vec(),
            lambda: rules.iter().zip(x).map(|(r, v)| r.lambda(*v)).collect(),
            eps,
            d_hilbert: hilbert_distance(x, star.as_slice()).d,
            dist_hull: hull.map(|h| h.distance(x)).transpose()?,
        })
    };
    records.push(rec(0, &x, schedule.at(0))?);
    for step in 1..=k {
        let eps = schedule.at(step - 1);
        x = r_eps(rules, &x, eps)?.into_vec();
        if step == k || step % stride.max(1) == 0 {
            records.push(rec(step, &x, eps)?);
        }
    }
    Ok(AveragedTrace {
        fixed_point: star,
        records,
        delta_plus_estimate: hull.map(|h| h.delta_plus_estimate),
    })
}

/// Long-format CSV in the common trace layout. The state of the averaged
/// system is itself an average, so `xbar` repeats `x`; there are no drops.
pub fn write_averaged_csv<W: Write>(trace: &AveragedTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "event",
        "agent",
        "x",
        "xbar",
        "lambda",
        "dropped",
        "d_hilbert",
        "dist_hull",
    ])?;
    for r in &trace.records {
        for i in 0..r.x.len() {
            w.write_record([
                r.step.to_string(),
                i.to_string(),
                format!("{}", r.x[i]),
                format!("{}", r.x[i]),
                format!("{}", r.lambda[i]),
                String::new(),
                format!("{}", r.d_hilbert),
                r.dist_hull.map(|d| format!("{d}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub eta: f64,
    pub eps: f64,
    pub trials: usize,
    /// Trials whose starting point satisfied `d_H(x, x*) > η`.
    pub samples: usize,
    pub violations: usize,
    pub min_decrease: f64,
    pub max_decrease: f64,
    pub mean_decrease: f64,
}

/// Point with `d_H(x, x*) > η`: half the trials perturb `x*` log-linearly to
/// a prescribed distance, the rest draw from a flat Dirichlet distribution.
fn far_point(rng: &mut ChaCha8Rng, star: &[f64], eta: f64, trial: usize) -> Option<Vec<f64>> {
    let n = star.len();
    if trial.is_multiple_of(2) {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(spread > 0.0) {
            return None;
        }
        let target = eta * rng.gen_range(1.01..4.0);
        let w: Vec<f64> = star
            .iter()
            .zip(&v)
            .map(|(s, vi)| s * (vi * target / spread).exp())
            .collect();
        SimplexPoint::from_weights(w)
            .ok()
            .map(SimplexPoint::into_vec)
    } else {
        for _ in 0..100 {
            let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let x = SimplexPoint::from_weights(w).ok()?.into_vec();
            if hilbert_distance(&x, star).d > eta {
                return Some(x);
            }
        }
        None
    }
}

/// Samples interior points farther than `η` from the fixed point and checks
/// that one step of `R_ε` strictly decreases their Hilbert distance to it.
pub fn check_hilbert_contraction(
    rules: &[ProbabilityRule],
    eta: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<ContractionReport> {
    if !(eta > 0.0) || trials == 0 {
        return Err(Error::InvalidParameter(
            "need eta > 0 and at least one trial".into(),
        ));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps {eps} outside (0, 1]")));
    }
    let star = solve_p_fixed_point(rules, DEFAULT_TOL)?.point.into_vec();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Option<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let Some(x) = far_point(&mut rng, &star, eta, trial) else {
                return Ok(None);
            };
            let before = hilbert_distance(&x, &star).d;
            if !(before > eta) {
                return Ok(None);
            }
            let after = hilbert_distance(r_eps(rules, &x, eps)?.as_slice(), &star).d;
            Ok(Some(before - after))
        })
        .collect::<Result<Vec<_>>>()?;
    let decreases: Vec<f64> = outcomes.into_iter().flatten().collect();
    let samples = decreases.len();
    let violations = decreases.iter().filter(|d| !(**d > 0.0)).count();
    let (min, max, sum) = decreases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(lo, hi, s), d| {
            (lo.min(*d), hi.max(*d), s + d)
        });
    Ok(ContractionReport {
        eta,
        eps,
        trials,
        samples,
        violations,
        min_decrease: if samples > 0 { min } else { 0.0 },
        max_decrease: if samples > 0 { max } else { 0.0 },
        mean_decrease: if samples > 0 {
            sum / samples as f64
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweep {
    pub eta: f64,
    pub reports: Vec<ContractionReport>,
    /// Largest `ε` of the grid below which every tested value had no violation.
    pub largest_clean_eps: Option<f64>,
}

/// Runs the contraction check over an increasing `ε` grid.
pub fn eps_sweep(
    rules: &[ProbabilityRule],
    eta: f64,
    grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<EpsSweep> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reports = sorted
        .iter()
        .map(|e| check_hilbert_contraction(rules, eta, *e, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let largest_clean_eps = reports
        .iter()
        .take_while(|r| r.violations == 0)
        .last()
        .map(|r| r.eps);
    Ok(EpsSweep {
        eta,
        reports,
        largest_clean_eps,
    })
}
