//! Reports for the non-simulation subcommands.

use serde::Serialize;

use aimd_core::averaged::{
    check_hilbert_contraction, eps_sweep, iterate_averaged, perturbation_bound, AveragedTrace,
    ContractionReport, EpsSchedule, EpsSweep, PHull,
};
use aimd_core::kkt::{solve_kkt, solve_p_fixed_point, KktSolution, PFixedPoint, DEFAULT_TOL};
use aimd_core::matrices::{
    contraction_factor, lifted_contraction_bound_check, perron_vector, LiftedContractionReport,
};
use aimd_core::problem::{gamma_upper_bound, Clamp};
use aimd_core::{NetworkSpec, Result, SimplexPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub n: usize,
    pub capacity: f64,
    pub gamma_upper_bound: Option<f64>,
    pub kkt: KktSolution,
    pub p_fixed_point: PFixedPoint,
    /// `‖P fixed point - KKT point‖₁`.
    pub gap: f64,
    /// Agents whose drop probability is clamped at the fixed point.
    pub clamped_agents: Vec<usize>,
}

pub fn kkt_report(net: &NetworkSpec) -> Result<KktReport> {
    let kkt = solve_kkt(&net.costs(), net.capacity(), DEFAULT_TOL)?;
    let p = solve_p_fixed_point(net.rules(), DEFAULT_TOL)?;
    let clamped_agents = net
        .rules()
        .iter()
        .zip(p.point.as_slice())
        .enumerate()
        .filter(|(_, (r, x))| r.evaluate(**x).1 != Clamp::None)
        .map(|(i, _)| i)
        .collect();
    Ok(KktReport {
        n: net.n(),
        capacity: net.capacity(),
        gamma_upper_bound: gamma_upper_bound(&net.costs(), net.capacity()).ok(),
        gap: kkt.point.l1_distance(p.point.as_slice()),
        kkt,
        p_fixed_point: p,
        clamped_agents,
    })
}

/// Work above which the exact lifted norm is skipped (pairs of extreme
/// points times block size).
pub const LIFTED_WORK_LIMIT: f64 = 2e9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatricesReport {
    pub n: usize,
    pub contraction_factor: Option<f64>,
    pub perron_vector: SimplexPoint,
    pub lifted: Vec<LiftedContractionReport>,
    /// Window lengths whose exact lifted norm was too expensive.
    pub lifted_skipped: Vec<usize>,
}

pub fn matrices_report(net: &NetworkSpec, windows: &[usize]) -> Result<MatricesReport> {
    let params = net.aimd_params()?;
    let n = net.n();
    let c = if n >= 2 {
        Some(contraction_factor(&params)?)
    } else {
        None
    };
    let extremes = (n * n.saturating_sub(1)) as f64;
    let mut lifted = Vec::new();
    let mut lifted_skipped = Vec::new();
    for &t in windows {
        let work = extremes * extremes * n as f64;
        if n < 2 || (t > 2 && work > LIFTED_WORK_LIMIT) || (t * n) > 4000 {
            lifted_skipped.push(t);
        } else {
            lifted.push(lifted_contraction_bound_check(&params, t)?);
        }
    }
    Ok(MatricesReport {
        n,
        contraction_factor: c,
        perron_vector: perron_vector(&params),
        lifted,
        lifted_skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedReport {
    pub schedule: EpsSchedule,
    pub steps: u64,
    pub final_d_hilbert: f64,
    pub hull_samples: usize,
    pub delta: f64,
    pub delta_plus_estimate: f64,
    /// The `δ⁺` value is the maximum over the simplex sample only.
    pub delta_plus_is_sample_based: bool,
    /// Consecutive recorded steps violating
    /// `dist(k+1) ≤ (1-ε_k) dist(k) + ε_k δ⁺ + 1e-9` (stride 1 only).
    pub hull_bound_violations: Option<usize>,
    pub perturbation_bound_at_first_eps: f64,
}

pub fn averaged_run(
    net: &NetworkSpec,
    x0: &SimplexPoint,
    schedule: EpsSchedule,
    steps: u64,
    stride: u64,
    hull_samples: usize,
) -> Result<(AveragedTrace, AveragedReport)> {
    let hull = PHull::sample(net.rules(), hull_samples)?;
    let trace = iterate_averaged(net.rules(), x0, schedule, steps, stride, Some(&hull))?;
    let hull_bound_violations = (stride <= 1).then(|| {
        trace
            .records
            .windows(2)
            .filter(|w| {
                let (a, b) = (w[0].dist_hull.unwrap_or(0.0), w[1].dist_hull.unwrap_or(0.0));
                b > (1.0 - w[1].eps) * a + w[1].eps * hull.delta_plus_estimate + 1e-9
            })
            .count()
    });
    let report = AveragedReport {
        schedule,
        steps,
        final_d_hilbert: trace.records.last().map_or(f64::NAN, |r| r.d_hilbert),
        hull_samples,
        delta: hull.delta,
        delta_plus_estimate: hull.delta_plus_estimate,
        delta_plus_is_sample_based: true,
        hull_bound_violations,
        perturbation_bound_at_first_eps: perturbation_bound(&trace.fixed_point, schedule.at(0)),
    };
    Ok((trace, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSummary {
    pub eps: f64,
    pub checks: Vec<ContractionReport>,
    pub sweeps: Vec<EpsSweep>,
    pub total_violations: usize,
}

pub const DEFAULT_ETAS: [f64; 3] = [0.25, 0.5, 1.0];
pub const DEFAULT_EPS_GRID: [f64; 8] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 0.6, 1.0];

pub fn contraction_summary(
    net: &NetworkSpec,
    eps: f64,
    trials: usize,
    seed: u64,
    sweep: bool,
) -> Result<ContractionSummary> {
    let checks = DEFAULT_ETAS
        .iter()
        .map(|eta| check_hilbert_contraction(net.rules(), *eta, eps, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let sweeps = if sweep {
        DEFAULT_ETAS
            .iter()
            .map(|eta| eps_sweep(net.rules(), *eta, &DEFAULT_EPS_GRID, trials, seed))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(ContractionSummary {
        eps,
        total_violations: checks.iter().map(|c| c.violations).sum(),
        checks,
        sweeps,
    })
}
