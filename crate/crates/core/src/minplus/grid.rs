//! Sampled min-plus convolution for arbitrary shapes.
//!
//! This is an approximation: the infimum is taken over grid points only, so
//! the result over-estimates the true convolution by at most one grid step
//! times the largest slope involved. Use [`super::convolve`] for the exact
//! convex and rate-latency cases.

use num_traits::{Signed, Zero};

use super::{Curve, CurveError};
use crate::rational::Q;

/// `(f ⊗ g)` sampled on `k·step` for `0 ≤ k·step ≤ horizon`, joined
/// linearly and extended with the smaller terminal slope.
pub fn grid_convolve(f: &Curve, g: &Curve, step: &Q, horizon: &Q) -> Result<Curve, CurveError> {
    if !step.is_positive() || horizon.is_negative() {
        return Err(CurveError::Domain(format!(
            "grid needs step > 0 and horizon >= 0, got step={step} horizon={horizon}"
        )));
    }
    let mut grid = Vec::new();
    let mut t = Q::zero();
    while &t <= horizon {
        grid.push(t.clone());
        t += step;
    }
    let mut points: Vec<(Q, Q)> = Vec::with_capacity(grid.len());
    for (i, t) in grid.iter().enumerate() {
        let inf = grid[..=i]
            .iter()
            .map(|s| f.value_at(s) + g.value_at(&(t - s)))
            .min()
            .expect("s = 0 is on the grid");
        points.push((t.clone(), inf));
    }
    let tail = f.terminal_slope().clone().min(g.terminal_slope().clone());
    Curve::from_points(&points, tail)
}
