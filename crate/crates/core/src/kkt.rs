//! Ground-truth solvers: the derivative-consensus (KKT) point of
//! `min Σ f_i(x_i)` subject to `Σ x_i = C, x ≥ 0`, and the fixed point of the
//! averaged map, characterized by `x_i λ_i(x_i)` being equal across agents.
//!
//! Both are nested bisections: the outer unknown is the common value, the
//! inner one inverts a strictly increasing scalar map per agent.

use serde::Serialize;

use crate::bisect::{increasing_root, increasing_root_tol};
use crate::error::{Error, Result};
use crate::problem::{CostFunction, ProbabilityRule};
use crate::simplex::SimplexPoint;

/// Default relative tolerance on the outer scalar unknown.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktSolution {
    /// Optimal shares `x*/C`.
    pub point: SimplexPoint,
    pub capacity: f64,
    /// Common derivative value `μ*`.
    pub multiplier: f64,
    /// `max_i f'_i(x*_i) - min_j f'_j(x*_j)` at the returned allocation.
    pub residual: f64,
}

impl KktSolution {
    /// Allocation in capacity units.
    pub fn allocation(&self) -> Vec<f64> {
        self.point
            .as_slice()
            .iter()
            .map(|p| p * self.capacity)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PFixedPoint {
    pub point: SimplexPoint,
    /// Common value of `x_i λ_i(x_i)`.
    pub gamma_f: f64,
}

pub fn consensus_residual(costs: &[CostFunction], x: &[f64]) -> f64 {
    let (lo, hi) = costs
        .iter()
        .zip(x)
        .map(|(f, xi)| f.derivative_at(*xi))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    if costs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn solve_kkt(costs: &[CostFunction], capacity: f64, tol: f64) -> Result<KktSolution> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter("empty cost list".into()));
    }
    if !(capacity > 0.0) || !capacity.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "capacity {capacity} must be positive"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let total = |mu: f64| -> f64 {
        costs
            .iter()
            .map(|f| f.derivative_inverse(mu, capacity))
            .sum()
    };
    let hi = costs
        .iter()
        .map(|f| f.derivative_at(capacity))
        .fold(0.0, f64::max);
    if !(total(0.0) <= capacity && total(hi) >= capacity) {
        return Err(Error::Bracket(format!(
            "no sign change of Σx(μ) - C on [0, {hi}]: Σx(0) = {}, Σx(hi) = {}",
            total(0.0),
            total(hi)
        )));
    }
    let (mu, _) = increasing_root_tol(|mu| total(mu) - capacity, 0.0, hi, tol);
    let x: Vec<f64> = costs
        .iter()
        .map(|f| f.derivative_inverse(mu, capacity))
        .collect();
    let point = SimplexPoint::from_weights(x)?;
    let alloc: Vec<f64> = point.as_slice().iter().map(|p| p * capacity).collect();
    let residual = consensus_residual(costs, &alloc);
    Ok(KktSolution {
        point,
        capacity,
        multiplier: mu,
        residual,
    })
}

/// Root of `r λ(r) = γ` on `[0, 1]`.
fn r_lambda_inverse(rule: &ProbabilityRule, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    if gamma >= rule.r_lambda(1.0) {
        return 1.0;
    }
    increasing_root(|r| rule.r_lambda(r) - gamma, 0.0, 1.0)
}

pub fn solve_p_fixed_point(rules: &[ProbabilityRule], tol: f64) -> Result<PFixedPoint> {
    if rules.is_empty() {
        return Err(Error::InvalidParameter("empty rule list".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let hi = rules
        .iter()
        .map(|r| r.lambda(1.0))
        .fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) {
        return Err(Error::Bracket(format!(
            "min_i λ_i(1) = {hi}; rλ(r) has no positive range"
        )));
    }
    let total = |g: f64| -> f64 { rules.iter().map(|r| r_lambda_inverse(r, g)).sum() };
    if total(hi) < 1.0 {
        return Err(Error::Bracket(format!(
            "Σx(γ) = {} < 1 at the top of the bracket γ = {hi}",
            total(hi)
        )));
    }
    let (gamma_f, _) = increasing_root_tol(|g| total(g) - 1.0, 0.0, hi, tol);
    let x: Vec<f64> = rules.iter().map(|r| r_lambda_inverse(r, gamma_f)).collect();
    Ok(PFixedPoint {
        point: SimplexPoint::from_weights(x)?,
        gamma_f,
    })
}
