//! Problem instances: cost functions, drop-probability rules and the network
//! specification, together with validation of the standing assumptions.
//!
//! Costs are polynomials with positive coefficients and no constant term.
//! A drop-probability rule maps an agent's averaged share `r` (normalized by
//! the capacity) to
//!
//! ```text
//! λ(r) = clamp(Γ f'(C r) / (C r), floor, 1)
//! ```
//!
//! The quotient `f'(w)/w` is evaluated term by term, so `r = 0` yields the
//! continuous extension without a `0/0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower clamp for drop probabilities.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Default number of grid points used by monotonicity and Γ checks.
pub const DEFAULT_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// `a r²`
    Poly2,
    /// `a r² + b r³`
    Poly23,
    /// `a r² + b r³ + c r⁴`
    Poly234,
    /// `a r² + b r⁴ + c r⁶`
    Poly246,
    /// Arbitrary positive-coefficient monomial sum.
    Monomials,
}

impl CostKind {
    pub const FAMILIES: [CostKind; 4] = [
        CostKind::Poly2,
        CostKind::Poly23,
        CostKind::Poly234,
        CostKind::Poly246,
    ];

    fn degrees(self) -> Option<&'static [u32]> {
        match self {
            CostKind::Poly2 => Some(&[2]),
            CostKind::Poly23 => Some(&[2, 3]),
            CostKind::Poly234 => Some(&[2, 3, 4]),
            CostKind::Poly246 => Some(&[2, 4, 6]),
            CostKind::Monomials => None,
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CostKind::Poly2 => "poly2",
            CostKind::Poly23 => "poly23",
            CostKind::Poly234 => "poly234",
            CostKind::Poly246 => "poly246",
            CostKind::Monomials => "monomials",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub degree: u32,
}

/// A strictly convex, increasing polynomial cost `f(r) = Σ c_d r^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    kind: CostKind,
    terms: Vec<Monomial>,
}

impl CostFunction {
    pub fn poly2(a: f64) -> Result<Self> {
        Self::from_kind(CostKind::Poly2, &[a])
    }

    pub fn poly23(a: f64, b: f64) -> Result<Self> {
        Self::from_kind(CostKind::Poly23, &[a, b])
    }

    pub fn poly234(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::from_kind(CostKind::Poly234, &[a, b, c])
    }

    pub fn poly246(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::from_kind(CostKind::Poly246, &[a, b, c])
    }

    /// Builds one of the named families from its coefficient list.
    pub fn from_kind(kind: CostKind, coeffs: &[f64]) -> Result<Self> {
        let degrees = kind.degrees().ok_or_else(|| {
            Error::InvalidParameter("monomial costs are built with CostFunction::monomials".into())
        })?;
        if coeffs.len() != degrees.len() {
            return Err(Error::InvalidParameter(format!(
                "{kind} expects {} coefficients, got {}",
                degrees.len(),
                coeffs.len()
            )));
        }
        let terms = coeffs
            .iter()
            .zip(degrees)
            .map(|(&coeff, &degree)| Monomial { coeff, degree })
            .collect();
        Self::checked(kind, terms)
    }

    /// Arbitrary sum of `(coefficient, degree)` monomials. At least one term
    /// of degree two or more is required for strict convexity.
    pub fn monomials(terms: &[(f64, u32)]) -> Result<Self> {
        let mut terms: Vec<Monomial> = terms
            .iter()
            .map(|&(coeff, degree)| Monomial { coeff, degree })
            .collect();
        terms.sort_by_key(|t| t.degree);
        if terms.windows(2).any(|w| w[0].degree == w[1].degree) {
            return Err(Error::InvalidParameter("repeated monomial degree".into()));
        }
        if terms.iter().any(|t| t.degree == 0) {
            return Err(Error::InvalidParameter(
                "constant terms are not allowed".into(),
            ));
        }
        if terms.iter().all(|t| t.degree < 2) {
            return Err(Error::DegenerateCost(
                "no term of degree two or more".into(),
            ));
        }
        Self::checked(CostKind::Monomials, terms)
    }

    fn checked(kind: CostKind, terms: Vec<Monomial>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::DegenerateCost("no terms".into()));
        }
        if let Some(t) = terms
            .iter()
            .find(|t| !(t.coeff > 0.0) || !t.coeff.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "coefficient {} of degree {} must be positive and finite",
                t.coeff, t.degree
            )));
        }
        Ok(Self { kind, terms })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    /// `f(w)` for any `w ≥ 0`.
    pub fn value_at(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * w.powi(t.degree as i32))
            .sum()
    }

    /// `f'(w)` for any `w ≥ 0`.
    pub fn derivative_at(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.degree as f64 * w.powi(t.degree as i32 - 1))
            .sum()
    }

    pub fn second_derivative_at(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.degree >= 2)
            .map(|t| t.coeff * (t.degree * (t.degree - 1)) as f64 * w.powi(t.degree as i32 - 2))
            .sum()
    }

    /// `f'(w)/w`, term by term. At `w = 0` this is the continuous extension:
    /// `2·c₂` when the lowest degree is two, `0` above that and `+∞` when a
    /// linear term is present.
    pub fn derivative_ratio_at(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let d = t.degree as i32;
                if d == 1 {
                    if w == 0.0 {
                        f64::INFINITY
                    } else {
                        t.coeff / w
                    }
                } else {
                    t.coeff * d as f64 * w.powi(d - 2)
                }
            })
            .sum()
    }

    /// Inverse of `f'` on `[0, upper]`, clipped to the interval ends.
    pub fn derivative_inverse(&self, target: f64, upper: f64) -> f64 {
        if target <= self.derivative_at(0.0) {
            return 0.0;
        }
        if target >= self.derivative_at(upper) {
            return upper;
        }
        crate::bisect::increasing_root(|w| self.derivative_at(w) - target, 0.0, upper)
    }
}

fn check_unit(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Domain { value: r })
    }
}

pub fn eval_cost(f: &CostFunction, r: f64) -> Result<f64> {
    check_unit(r)?;
    Ok(f.value_at(r))
}

pub fn eval_cost_derivative(f: &CostFunction, r: f64) -> Result<f64> {
    check_unit(r)?;
    Ok(f.derivative_at(r))
}

/// Which side of the clamp, if any, produced a drop probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    None,
    Floor,
    Ceiling,
}

/// Per-agent drop-probability rule `λ(r) = clamp(Γ f'(s r)/(s r), floor, 1)`
/// where `s` is the capacity the agent's share is normalized by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRule {
    cost: CostFunction,
    gamma: f64,
    floor: f64,
    scale: f64,
}

impl ProbabilityRule {
    pub fn new(cost: CostFunction, gamma: f64) -> Result<Self> {
        Self::with_params(cost, gamma, DEFAULT_FLOOR, 1.0)
    }

    /// `floor` may be zero (audit mode without the lower clamp); `scale` is
    /// the network capacity.
    pub fn with_params(cost: CostFunction, gamma: f64, floor: f64, scale: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma {gamma} must be finite and nonnegative"
            )));
        }
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::InvalidParameter(format!(
                "floor {floor} outside [0, 1]"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale {scale} must be positive"
            )));
        }
        Ok(Self {
            cost,
            gamma,
            floor,
            scale,
        })
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The unclamped value `Γ f'(s r)/(s r)`.
    pub fn raw(&self, r: f64) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        self.gamma * self.cost.derivative_ratio_at(self.scale * r)
    }

    /// Clamped probability together with the clamp that was applied.
    pub fn evaluate(&self, r: f64) -> (f64, Clamp) {
        let raw = self.raw(r);
        if raw > 1.0 {
            (1.0, Clamp::Ceiling)
        } else if raw < self.floor {
            (self.floor, Clamp::Floor)
        } else {
            (raw, Clamp::None)
        }
    }

    /// Clamped probability without domain checking.
    pub fn lambda(&self, r: f64) -> f64 {
        self.evaluate(r).0
    }

    /// `r λ(r)`, strictly increasing under the standing assumptions.
    pub fn r_lambda(&self, r: f64) -> f64 {
        r * self.lambda(r)
    }
}

pub fn drop_probability(rule: &ProbabilityRule, r: f64) -> Result<f64> {
    check_unit(r)?;
    Ok(rule.lambda(r))
}

fn unit_grid(points: usize) -> impl Iterator<Item = f64> {
    (1..=points).map(move |k| k as f64 / points as f64)
}

/// Largest Γ with `Γ f'_i(x)/x ≤ 1` on a uniform grid of `(0, C]` (and at
/// the continuous extension in zero) for every cost.
pub fn gamma_upper_bound(costs: &[CostFunction], capacity: f64) -> Result<f64> {
    gamma_upper_bound_with_grid(costs, capacity, DEFAULT_GRID_POINTS)
}

pub fn gamma_upper_bound_with_grid(
    costs: &[CostFunction],
    capacity: f64,
    points: usize,
) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter("empty cost list".into()));
    }
    if !(capacity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "capacity {capacity} must be positive"
        )));
    }
    let mut worst = 0.0_f64;
    for (i, f) in costs.iter().enumerate() {
        let at_zero = f.derivative_ratio_at(0.0);
        if at_zero.is_infinite() {
            return Err(Error::DegenerateCost(format!(
                "cost {i} has f'(0) > 0, so f'(x)/x is unbounded near zero"
            )));
        }
        let sup = unit_grid(points)
            .map(|u| f.derivative_ratio_at(u * capacity))
            .fold(at_zero, f64::max);
        if sup <= 0.0 {
            return Err(Error::DegenerateCost(format!(
                "cost {i} has identically zero derivative"
            )));
        }
        worst = worst.max(sup);
    }
    Ok(1.0 / worst)
}

/// The full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    capacity: f64,
    rules: Vec<ProbabilityRule>,
    growth: Vec<f64>,
    beta: Vec<f64>,
}

impl NetworkSpec {
    /// Structural construction only: lengths must agree and `n ≥ 1`. The
    /// remaining invariants are reported by [`validate_network_spec`].
    pub fn new(
        capacity: f64,
        rules: Vec<ProbabilityRule>,
        growth: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let n = rules.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "a network needs at least one agent".into(),
            ));
        }
        if growth.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: growth.len(),
            });
        }
        if beta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: beta.len(),
            });
        }
        Ok(Self {
            capacity,
            rules,
            growth,
            beta,
        })
    }

    /// Network with a common Γ, floor, growth rate and decrease factor.
    pub fn homogeneous(
        costs: Vec<CostFunction>,
        capacity: f64,
        gamma: f64,
        floor: f64,
        growth: f64,
        beta: f64,
    ) -> Result<Self> {
        let n = costs.len();
        let rules = costs
            .into_iter()
            .map(|c| ProbabilityRule::with_params(c, gamma, floor, capacity))
            .collect::<Result<Vec<_>>>()?;
        Self::new(capacity, rules, vec![growth; n], vec![beta; n])
    }

    pub fn n(&self) -> usize {
        self.rules.len()
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn rules(&self) -> &[ProbabilityRule] {
        &self.rules
    }

    pub fn growth(&self) -> &[f64] {
        &self.growth
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn costs(&self) -> Vec<CostFunction> {
        self.rules.iter().map(|r| r.cost().clone()).collect()
    }

    /// Matrix-model increase vector: growth rates normalized to sum one.
    pub fn alpha(&self) -> Vec<f64> {
        let total: f64 = self.growth.iter().sum();
        self.growth.iter().map(|g| g / total).collect()
    }

    pub fn aimd_params(&self) -> Result<crate::matrices::AimdParams> {
        crate::matrices::AimdParams::new(
            crate::simplex::SimplexPoint::from_weights(self.growth.clone())?,
            self.beta.clone(),
        )
    }

    /// Same network with every rule's clamp floor replaced.
    pub fn with_floor(&self, floor: f64) -> Result<Self> {
        let rules = self
            .rules
            .iter()
            .map(|r| ProbabilityRule::with_params(r.cost().clone(), r.gamma(), floor, r.scale()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.capacity, rules, self.growth.clone(), self.beta.clone())
    }
}

/// A single violated assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    CapacityNotPositive {
        capacity: f64,
    },
    BetaOutOfRange {
        agent: usize,
        beta: f64,
    },
    GrowthNotPositive {
        agent: usize,
        growth: f64,
    },
    FloorNotPositive {
        agent: usize,
    },
    ScaleMismatch {
        agent: usize,
        scale: f64,
    },
    CostNotIncreasing {
        agent: usize,
        at: f64,
    },
    CostNotStrictlyConvex {
        agent: usize,
        at: f64,
    },
    NotMonotone {
        agent: usize,
        at: f64,
    },
    GammaBoundExceeded {
        agent: usize,
        gamma: f64,
        bound: f64,
    },
    DegenerateCost {
        agent: usize,
        reason: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CapacityNotPositive { capacity } => write!(f, "capacity {capacity} is not positive"),
            Violation::BetaOutOfRange { agent, beta } => write!(f, "agent {agent}: beta out of (0,1) ({beta})"),
            Violation::GrowthNotPositive { agent, growth } => {
                write!(f, "agent {agent}: growth rate {growth} not positive, alpha leaves the relative interior")
            }
            Violation::FloorNotPositive { agent } => write!(f, "agent {agent}: probability floor is zero"),
            Violation::ScaleMismatch { agent, scale } => {
                write!(f, "agent {agent}: rule normalized by {scale}, not by the network capacity")
            }
            Violation::CostNotIncreasing { agent, at } => write!(f, "agent {agent}: cost decreasing near r={at}"),
            Violation::CostNotStrictlyConvex { agent, at } => {
                write!(f, "agent {agent}: cost not strictly convex near r={at}")
            }
            Violation::NotMonotone { agent, at } => {
                write!(f, "agent {agent}: r*lambda(r) not strictly increasing near r={at}")
            }
            Violation::GammaBoundExceeded { agent, gamma, bound } => write!(
                f,
                "agent {agent}: Gamma bound exceeded, clamping active (gamma {gamma} > admissible {bound})"
            ),
            Violation::DegenerateCost { agent, reason } => write!(f, "agent {agent}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_network_spec(spec: &NetworkSpec) -> ValidationReport {
    validate_network_spec_with_grid(spec, DEFAULT_GRID_POINTS)
}

pub fn validate_network_spec_with_grid(spec: &NetworkSpec, points: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let capacity = spec.capacity();
    if !(capacity > 0.0) || !capacity.is_finite() {
        violations.push(Violation::CapacityNotPositive { capacity });
    }
    for (agent, &beta) in spec.beta().iter().enumerate() {
        if !(beta > 0.0 && beta < 1.0) {
            violations.push(Violation::BetaOutOfRange { agent, beta });
        }
    }
    for (agent, &growth) in spec.growth().iter().enumerate() {
        if !(growth > 0.0) || !growth.is_finite() {
            violations.push(Violation::GrowthNotPositive { agent, growth });
        }
    }
    for (agent, rule) in spec.rules().iter().enumerate() {
        if !(rule.floor() > 0.0) {
            violations.push(Violation::FloorNotPositive { agent });
        }
        if capacity > 0.0 && (rule.scale() - capacity).abs() > 1e-12 * capacity {
            violations.push(Violation::ScaleMismatch {
                agent,
                scale: rule.scale(),
            });
        }
        let cost = rule.cost();
        let scale = rule.scale();
        let mut prev_d = cost.derivative_at(0.0);
        let mut prev_rl = 0.0;
        let mut increasing_ok = prev_d >= 0.0;
        let mut convex_ok = true;
        let mut monotone_ok = true;
        for r in unit_grid(points) {
            let d = cost.derivative_at(r * scale);
            if increasing_ok && d < 0.0 {
                increasing_ok = false;
                violations.push(Violation::CostNotIncreasing { agent, at: r });
            }
            if convex_ok && !(d > prev_d) {
                convex_ok = false;
                violations.push(Violation::CostNotStrictlyConvex { agent, at: r });
            }
            let rl = rule.r_lambda(r);
            if monotone_ok && !(rl > prev_rl) {
                monotone_ok = false;
                violations.push(Violation::NotMonotone { agent, at: r });
            }
            prev_d = d;
            prev_rl = rl;
        }
        match gamma_upper_bound_with_grid(std::slice::from_ref(cost), scale, points) {
            Ok(bound) => {
                if rule.gamma() > bound * (1.0 + 1e-12) {
                    violations.push(Violation::GammaBoundExceeded {
                        agent,
                        gamma: rule.gamma(),
                        bound,
                    });
                }
            }
            Err(e) => violations.push(Violation::DegenerateCost {
                agent,
                reason: e.to_string(),
            }),
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g1(a: f64) -> CostFunction {
        CostFunction::poly2(a).unwrap()
    }

    #[test]
    fn cost_values() {
        assert_relative_eq!(eval_cost(&g1(1.0), 0.5).unwrap(), 0.25);
        let g3 = CostFunction::poly234(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(eval_cost(&g3, 0.5).unwrap(), 0.4375, epsilon = 1e-15);
        for f in [
            g1(3.0),
            g3.clone(),
            CostFunction::poly246(1.0, 2.0, 3.0).unwrap(),
        ] {
            assert_eq!(eval_cost(&f, 0.0).unwrap(), 0.0);
            assert_eq!(eval_cost_derivative(&f, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_values() {
        assert_relative_eq!(eval_cost_derivative(&g1(1.0), 0.5).unwrap(), 1.0);
        let g2 = CostFunction::poly23(2.0, 3.0).unwrap();
        assert_relative_eq!(
            eval_cost_derivative(&g2, 0.2).unwrap(),
            1.16,
            epsilon = 1e-14
        );
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            eval_cost(&g1(1.0), 1.5),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            eval_cost_derivative(&g1(1.0), -0.1),
            Err(Error::Domain { .. })
        ));
        let rule = ProbabilityRule::new(g1(1.0), 0.1).unwrap();
        assert!(drop_probability(&rule, 2.0).is_err());
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(CostFunction::poly2(0.0).is_err());
        assert!(CostFunction::poly23(1.0, -1.0).is_err());
        assert!(CostFunction::from_kind(CostKind::Poly234, &[1.0]).is_err());
        assert!(CostFunction::monomials(&[(1.0, 1)]).is_err());
        assert!(CostFunction::monomials(&[(1.0, 2), (2.0, 2)]).is_err());
        assert!(CostFunction::monomials(&[(1.0, 2), (2.0, 5)]).is_ok());
    }

    #[test]
    fn drop_probability_examples() {
        let rule = ProbabilityRule::new(g1(650.0), 1.0 / 1300.0).unwrap();
        for r in [0.0, 0.3, 1.0] {
            assert_relative_eq!(drop_probability(&rule, r).unwrap(), 1.0, epsilon = 1e-15);
        }
        let rule = ProbabilityRule::new(g1(1.0), 1.0 / 1300.0).unwrap();
        assert_relative_eq!(
            drop_probability(&rule, 0.5).unwrap(),
            2.0 / 1300.0,
            epsilon = 1e-18
        );
        assert_relative_eq!(
            drop_probability(&rule, 0.0).unwrap(),
            2.0 / 1300.0,
            epsilon = 1e-18
        );
    }

    #[test]
    fn clamp_sides() {
        let rule =
            ProbabilityRule::new(CostFunction::monomials(&[(1.0, 3)]).unwrap(), 0.1).unwrap();
        assert_eq!(rule.evaluate(0.0), (DEFAULT_FLOOR, Clamp::Floor));
        let rule = ProbabilityRule::new(g1(100.0), 1.0).unwrap();
        assert_eq!(rule.evaluate(0.5), (1.0, Clamp::Ceiling));
        let rule =
            ProbabilityRule::new(CostFunction::monomials(&[(1.0, 1), (1.0, 2)]).unwrap(), 0.1)
                .unwrap();
        assert_eq!(rule.evaluate(0.0), (1.0, Clamp::Ceiling));
    }

    #[test]
    fn gamma_bound_examples() {
        assert_relative_eq!(
            gamma_upper_bound(&[g1(1.0)], 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            gamma_upper_bound(&[g1(1.0), g1(2.0)], 1.0).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert!(gamma_upper_bound(&[], 1.0).is_err());
        let linear = CostFunction::monomials(&[(1.0, 1), (1.0, 2)]).unwrap();
        assert!(matches!(
            gamma_upper_bound(&[linear], 1.0),
            Err(Error::DegenerateCost(_))
        ));
    }

    #[test]
    fn gamma_bound_admits_ensemble_maximum() {
        // Worst admissible agents of each family at the coefficient cap.
        let costs = vec![
            g1(100.0),
            CostFunction::poly23(100.0, 100.0).unwrap(),
            CostFunction::poly234(100.0, 100.0, 100.0).unwrap(),
            CostFunction::poly246(100.0, 100.0, 100.0).unwrap(),
        ];
        let bound = gamma_upper_bound(&costs, 1.0).unwrap();
        assert_relative_eq!(bound, 1.0 / 1200.0, epsilon = 1e-15);
        assert!(bound >= 1.0 / 1300.0);
    }

    #[test]
    fn validation_reports() {
        let costs = vec![g1(1.0), CostFunction::poly246(3.0, 4.0, 5.0).unwrap()];
        let spec =
            NetworkSpec::homogeneous(costs.clone(), 1.0, 1.0 / 1300.0, DEFAULT_FLOOR, 0.01, 0.85)
                .unwrap();
        assert!(validate_network_spec(&spec).is_valid());

        let mut beta_bad = spec.clone();
        beta_bad.beta[1] = 1.0;
        let report = validate_network_spec(&beta_bad);
        assert_eq!(
            report.violations,
            vec![Violation::BetaOutOfRange {
                agent: 1,
                beta: 1.0
            }]
        );
        assert!(report.to_string().contains("beta out of (0,1)"));

        let bound = gamma_upper_bound(&costs, 1.0).unwrap();
        let loud =
            NetworkSpec::homogeneous(costs, 1.0, 10.0 * bound, DEFAULT_FLOOR, 0.01, 0.85).unwrap();
        let report = validate_network_spec(&loud);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::GammaBoundExceeded { .. })));
        assert!(report.to_string().contains("Gamma bound exceeded"));
    }

    #[test]
    fn validation_flags_floor_and_growth() {
        let spec =
            NetworkSpec::homogeneous(vec![g1(1.0), g1(2.0)], 1.0, 0.1, 0.0, 0.0, 0.5).unwrap();
        let report = validate_network_spec(&spec);
        assert!(report
            .violations
            .contains(&Violation::FloorNotPositive { agent: 0 }));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::GrowthNotPositive { agent: 1, .. })));
    }

    #[test]
    fn structural_errors() {
        let rule = ProbabilityRule::new(g1(1.0), 0.1).unwrap();
        assert!(NetworkSpec::new(1.0, vec![], vec![], vec![]).is_err());
        assert!(NetworkSpec::new(1.0, vec![rule.clone()], vec![1.0, 1.0], vec![0.5]).is_err());
        assert!(ProbabilityRule::with_params(g1(1.0), -1.0, 0.0, 1.0).is_err());
        assert!(ProbabilityRule::with_params(g1(1.0), 0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn derivative_inverse_round_trips() {
        let f = CostFunction::poly234(2.0, 3.0, 4.0).unwrap();
        for w in [0.05, 0.3, 0.77] {
            let mu = f.derivative_at(w);
            assert_relative_eq!(f.derivative_inverse(mu, 1.0), w, epsilon = 1e-14);
        }
        assert_eq!(f.derivative_inverse(-1.0, 1.0), 0.0);
        assert_eq!(f.derivative_inverse(1e9, 1.0), 1.0);
    }
}
