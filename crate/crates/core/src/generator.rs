//! Random network instances: mixed polynomial families with uniform
//! coefficients, or pure quadratics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{CostFunction, CostKind, NetworkSpec, DEFAULT_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub n: usize,
    /// Coefficients are uniform on `(0, coeff_max]`.
    pub coeff_max: f64,
    pub gamma: f64,
    #[serde(default = "default_capacity")]
    pub capacity: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Families drawn uniformly per agent.
    #[serde(default = "default_families")]
    pub families: Vec<CostKind>,
}

fn default_capacity() -> f64 {
    1.0
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR
}
fn default_growth() -> f64 {
    0.01
}
fn default_beta() -> f64 {
    0.85
}
fn default_families() -> Vec<CostKind> {
    CostKind::FAMILIES.to_vec()
}

impl GeneratorParams {
    /// Unit capacity, growth 0.01, β = 0.85 and all four families.
    pub fn new(n: usize, coeff_max: f64, gamma: f64) -> Self {
        Self {
            n,
            coeff_max,
            gamma,
            capacity: default_capacity(),
            floor: default_floor(),
            growth: default_growth(),
            beta: default_beta(),
            families: default_families(),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<NetworkSpec> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "a network needs at least one agent".into(),
            ));
        }
        if !(self.coeff_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coeff_max {} must be positive",
                self.coeff_max
            )));
        }
        if self.families.is_empty() || self.families.contains(&CostKind::Monomials) {
            return Err(Error::InvalidParameter(
                "families must be a nonempty list of named families".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let costs = (0..self.n)
            .map(|_| {
                let kind = self.families[rng.gen_range(0..self.families.len())];
                let m = match kind {
                    CostKind::Poly2 => 1,
                    CostKind::Poly23 => 2,
                    _ => 3,
                };
                let coeffs: Vec<f64> = (0..m)
                    .map(|_| self.coeff_max * (1.0 - rng.gen::<f64>()))
                    .collect();
                CostFunction::from_kind(kind, &coeffs)
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkSpec::homogeneous(
            costs,
            self.capacity,
            self.gamma,
            self.floor,
            self.growth,
            self.beta,
        )
    }
}

pub fn generate_random_network(
    n: usize,
    coeff_max: f64,
    gamma: f64,
    seed: u64,
) -> Result<NetworkSpec> {
    GeneratorParams::new(n, coeff_max, gamma).generate(seed)
}

/// Quadratic costs `a_i r²` with `a_i` uniform on `[a_min, a_max]`.
pub fn random_quadratic_costs(
    n: usize,
    a_min: f64,
    a_max: f64,
    seed: u64,
) -> Result<Vec<CostFunction>> {
    if !(a_min > 0.0 && a_max >= a_min) {
        return Err(Error::InvalidParameter(format!(
            "coefficient range [{a_min}, {a_max}] is invalid"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| CostFunction::poly2(rng.gen_range(a_min..=a_max)))
        .collect()
}
