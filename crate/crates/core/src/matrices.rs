//! The AIMD matrix family, its Perron vector and contraction constants, and
//! the two lifted chains (finite window and long-term averaging).
//!
//! Matrices are dense and meant for analysis; the simulation paths use the
//! matrix-free update [`AimdParams::apply_pattern`].
//!
//! Induced norms restricted to `V = {e·v = 0}` are exact: the unit 1-ball of
//! `V` is the convex hull of the points `(e_i - e_j)/2`, so the norm is a
//! maximum over those directions. The lifted norms are maxima of block
//! 1-norms; each output block of either lift depends on at most two input
//! blocks, so enumerating pairs of extreme points is exact as well.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Which agents back off at a capacity event (`true` = multiply by β).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DropPattern(Vec<bool>);

impl DropPattern {
    pub fn new(drops: Vec<bool>) -> Self {
        Self(drops)
    }

    pub fn all(n: usize, drop: bool) -> Self {
        Self(vec![drop; n])
    }

    /// Pattern whose agent `i` drops iff bit `i` of `bits` is set.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self((0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn drops(&self) -> &[bool] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|d| **d).count()
    }
}

/// Increase vector `α ∈ ri Σ` and decrease factors `β ∈ (0,1)ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AimdParams {
    alpha: SimplexPoint,
    beta: Vec<f64>,
}

impl AimdParams {
    pub fn new(alpha: SimplexPoint, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != alpha.len() {
            return Err(Error::Dimension {
                expected: alpha.len(),
                got: beta.len(),
            });
        }
        if !alpha.is_interior() {
            return Err(Error::InvalidParameter(
                "alpha must have positive entries".into(),
            ));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidParameter(format!("beta {b} outside (0, 1)")));
        }
        Ok(Self { alpha, beta })
    }

    /// Uniform `α` and a common `β`.
    pub fn uniform(n: usize, beta: f64) -> Result<Self> {
        Self::new(SimplexPoint::uniform(n), vec![beta; n])
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn alpha(&self) -> &SimplexPoint {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `x ← diag(β̃) x + α (e - β̃)ᵀ x` in O(n).
    pub fn apply_pattern(&self, drops: &[bool], x: &mut [f64]) {
        debug_assert_eq!(drops.len(), x.len());
        let mut freed = 0.0;
        for ((xi, &d), &b) in x.iter_mut().zip(drops).zip(&self.beta) {
            if d {
                freed += (1.0 - b) * *xi;
                *xi *= b;
            }
        }
        for (xi, a) in x.iter_mut().zip(self.alpha.as_slice()) {
            *xi += a * freed;
        }
    }

    pub fn matrix(&self, pattern: &DropPattern) -> Result<AimdMatrix> {
        let n = self.n();
        if pattern.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: pattern.len(),
            });
        }
        let alpha = self.alpha.as_slice();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let bt = if pattern.drops()[j] {
                self.beta[j]
            } else {
                1.0
            };
            let diag = if i == j { bt } else { 0.0 };
            diag + alpha[i] * (1.0 - bt)
        });
        Ok(AimdMatrix {
            matrix: m,
            pattern: pattern.clone(),
        })
    }

    /// The matrix in which every agent backs off.
    pub fn a1(&self) -> AimdMatrix {
        self.matrix(&DropPattern::all(self.n(), true))
            .expect("pattern length matches")
    }
}

/// A column-stochastic member of the AIMD family.
#[derive(Debug, Clone, PartialEq)]
pub struct AimdMatrix {
    matrix: DMatrix<f64>,
    pattern: DropPattern,
}

impl AimdMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pattern(&self) -> &DropPattern {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }
}

pub fn build_aimd_matrix(
    alpha: &SimplexPoint,
    beta: &[f64],
    pattern: &DropPattern,
) -> Result<AimdMatrix> {
    AimdParams::new(alpha.clone(), beta.to_vec())?.matrix(pattern)
}

/// Positive eigenvector of `A₁`, entries proportional to `α_i/(1-β_i)`.
pub fn perron_vector(params: &AimdParams) -> SimplexPoint {
    let w = params
        .alpha()
        .as_slice()
        .iter()
        .zip(params.beta())
        .map(|(a, b)| a / (1.0 - b))
        .collect();
    SimplexPoint::from_weights(w).expect("alpha interior and beta < 1 give positive weights")
}

/// Induced 1-norm of `m` restricted to `V`: `max_{i<j} ‖m(e_i - e_j)‖₁ / 2`.
pub fn restricted_norm(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.ncols();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "the subspace V is trivial for n = 1".into(),
        ));
    }
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = m
                .column(i)
                .iter()
                .zip(m.column(j).iter())
                .map(|(a, b)| (a - b).abs())
                .sum();
            best = best.max(0.5 * s);
        }
    }
    Ok(best)
}

/// `c = ‖A₁|V‖₁`.
pub fn contraction_factor(params: &AimdParams) -> Result<f64> {
    restricted_norm(params.a1().matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "lift")]
pub enum LiftKind {
    Window { t: usize },
    LongTerm { k: u64 },
}

/// A block matrix acting on stacked copies of `Rⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    matrix: DMatrix<f64>,
    kind: LiftKind,
    block: usize,
}

impl LiftedMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> LiftKind {
        self.kind
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn blocks(&self) -> usize {
        self.matrix.nrows() / self.block
    }

    pub fn block_view(&self, row: usize, col: usize) -> DMatrix<f64> {
        let b = self.block;
        self.matrix.view((row * b, col * b), (b, b)).into_owned()
    }
}

/// Window lift: block row `i` (1-based) holds `A/i` in block column one and
/// `(i-1)/i · I` in block column `i-1`.
pub fn build_lifted_window_matrix(a: &AimdMatrix, t: usize) -> Result<LiftedMatrix> {
    if t == 0 {
        return Err(Error::InvalidParameter(
            "window length must be at least one".into(),
        ));
    }
    let n = a.n();
    let mut m = DMatrix::zeros(n * t, n * t);
    for i in 1..=t {
        let r = (i - 1) * n;
        let w = 1.0 / i as f64;
        m.view_mut((r, 0), (n, n)).copy_from(&(a.matrix() * w));
        if i >= 2 {
            let c = (i - 2) * n;
            let keep = (i - 1) as f64 / i as f64;
            for d in 0..n {
                m[(r + d, c + d)] += keep;
            }
        }
    }
    Ok(LiftedMatrix {
        matrix: m,
        kind: LiftKind::Window { t },
        block: n,
    })
}

/// Long-term lift `[[A, 0], [A/(k+2), (k+1)/(k+2) I]]`.
pub fn build_lifted_longterm_matrix(a: &AimdMatrix, k: u64) -> LiftedMatrix {
    let n = a.n();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a.matrix());
    let w = 1.0 / (k as f64 + 2.0);
    m.view_mut((n, 0), (n, n)).copy_from(&(a.matrix() * w));
    for d in 0..n {
        m[(n + d, n + d)] = 1.0 - w;
    }
    LiftedMatrix {
        matrix: m,
        kind: LiftKind::LongTerm { k },
        block: n,
    }
}

/// `max_i ‖z_i‖₁` over the `t` stacked blocks of `z`.
pub fn window_norm(z: &[f64], t: usize) -> Result<f64> {
    if t == 0 || !z.len().is_multiple_of(t) || z.is_empty() {
        return Err(Error::Dimension {
            expected: t.max(1) * (z.len() / t.max(1)).max(1),
            got: z.len(),
        });
    }
    let n = z.len() / t;
    Ok(z.chunks(n)
        .map(|b| b.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `max(‖x‖₁, ‖y‖₁)` for the stacked pair `v = (x, y)`.
pub fn pair_norm(v: &[f64]) -> Result<f64> {
    window_norm(v, 2)
}

/// Domain of an induced lifted norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// All of `R^{bn}`.
    Full,
    /// Stacked vectors whose every block lies in `V`.
    W,
}

fn extreme_points(n: usize, subspace: Subspace) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    match subspace {
        Subspace::Full => {
            for k in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[k] = s;
                    pts.push(v);
                }
            }
        }
        Subspace::W => {
            for k in 0..n {
                for l in 0..n {
                    if k != l {
                        let mut v = vec![0.0; n];
                        v[k] = 0.5;
                        v[l] = -0.5;
                        pts.push(v);
                    }
                }
            }
        }
    }
    pts
}

/// Exact operator norm of a lifted matrix under the block-max norm.
pub fn lifted_induced_norm(lifted: &LiftedMatrix, subspace: Subspace) -> Result<f64> {
    let n = lifted.block_size();
    if subspace == Subspace::W && n < 2 {
        return Err(Error::InvalidParameter(
            "the subspace W is trivial for n = 1".into(),
        ));
    }
    let b = lifted.blocks();
    let extremes = extreme_points(n, subspace);
    let images = |blk: &DMatrix<f64>| -> Vec<Vec<f64>> {
        extremes
            .iter()
            .map(|u| {
                (blk * nalgebra::DVector::from_column_slice(u))
                    .as_slice()
                    .to_vec()
            })
            .collect()
    };
    let mut best = 0.0_f64;
    for row in 0..b {
        let cols: Vec<usize> = (0..b)
            .filter(|&c| lifted.block_view(row, c).iter().any(|v| *v != 0.0))
            .collect();
        let value = match cols.as_slice() {
            [] => 0.0,
            [p] => images(&lifted.block_view(row, *p))
                .iter()
                .map(|v| v.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            [p, q] => {
                let left = images(&lifted.block_view(row, *p));
                let right = images(&lifted.block_view(row, *q));
                let mut m = 0.0_f64;
                for u in &left {
                    for v in &right {
                        let s: f64 = u.iter().zip(v).map(|(a, c)| (a + c).abs()).sum();
                        m = m.max(s);
                    }
                }
                m
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "exact lifted norm supports at most two nonzero blocks per block row".into(),
                ))
            }
        };
        best = best.max(value);
    }
    Ok(best)
}

/// Contraction constants of the window lift of `A₁` on `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedContractionReport {
    pub window: usize,
    /// `‖A₁|V‖₁`.
    pub c: f64,
    /// `(c + T - 1)/T`.
    pub bound: f64,
    /// Exact restricted norm of the lifted `A₁`.
    pub measured: f64,
    pub holds: bool,
}

pub fn lifted_contraction_bound_check(
    params: &AimdParams,
    t: usize,
) -> Result<LiftedContractionReport> {
    let c = contraction_factor(params)?;
    let lifted = build_lifted_window_matrix(&params.a1(), t)?;
    let measured = lifted_induced_norm(&lifted, Subspace::W)?;
    let bound = (c + t as f64 - 1.0) / t as f64;
    Ok(LiftedContractionReport {
        window: t,
        c,
        bound,
        measured,
        holds: measured <= bound + 1e-10,
    })
}
