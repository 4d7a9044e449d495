//! Scalar bisection shared by the KKT and fixed-point solvers.

/// Iteration cap for every bisection in the crate.
pub const MAX_ITERATIONS: usize = 200;

/// Root of an increasing function with `g(lo) ≤ 0 ≤ g(hi)`, refined until
/// the bracket stops shrinking or the iteration cap is reached.
pub fn increasing_root(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Like [`increasing_root`] but stops once the bracket width falls below
/// `tol` relative to its upper end. Returns the midpoint and the iteration
/// count.
pub fn increasing_root_tol(
    mut g: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, usize) {
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        iterations += 1;
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), iterations)
}
