//! Loop closure: turn an open clamped spline into a periodic one by wrapping
//! control points, discarding the duplicate endpoint. Seam continuity is C2
//! by construction of the periodic knot vector.

use super::{BSpline, KnotVector};
use crate::error::SplineError;

#[derive(Debug, Clone, Copy)]
pub struct ClosureParams {
    /// Maximum distance between the open spline's endpoints.
    pub max_endpoint_gap: f64,
    /// Maximum allowed geometric deviation of the closed curve from the open
    /// one over the shared domain.
    pub max_shape_deviation: f64,
}

impl Default for ClosureParams {
    fn default() -> Self {
        Self { max_endpoint_gap: 6.0, max_shape_deviation: 5.0 }
    }
}

const DEVIATION_SAMPLES: usize = 256;

/// Periodic knot vector for `m` wrapped control points from breakpoints
/// s_0 = 0 <= ... <= s_m = 1: satisfies t[j + m] = t[j] + 1 wherever both
/// sides exist, which makes the seam C^{order-2} by construction.
pub(crate) fn periodic_knot_vector(breaks: &[f64], order: usize) -> Vec<f64> {
    let m = breaks.len() - 1;
    let len = m + 2 * order - 1;
    let mut knots = vec![0.0; len];
    for (i, &s) in breaks.iter().enumerate() {
        knots[order - 1 + i] = s;
    }
    for j in 1..order {
        knots[order - 1 - j] = breaks[m - j] - 1.0;
    }
    for j in 1..order {
        knots[order - 1 + m + j] = 1.0 + breaks[j];
    }
    knots
}

impl BSpline {
    /// Close the curve into a periodic loop. Span lengths of the closed
    /// parameterization follow the control-polygon chord lengths.
    pub fn close_loop(&self, params: &ClosureParams) -> Result<BSpline, SplineError> {
        if self.is_closed() {
            return Err(SplineError::InvalidConfiguration("spline is already closed".into()));
        }
        let k = self.order();
        let n = self.n_control() - 1;
        if n < k {
            return Err(SplineError::InvalidConfiguration(
                "too few control points to close".into(),
            ));
        }
        let pts = self.control_points();
        let gap = (pts[0] - pts[n]).norm();
        if gap > params.max_endpoint_gap {
            return Err(SplineError::ClosureRejected(format!(
                "endpoint gap {gap:.3} m exceeds {:.3} m",
                params.max_endpoint_gap
            )));
        }

        // Wrapped control points, dropping the duplicate endpoint.
        let m = n;
        let q: Vec<_> = pts[..m].to_vec();
        let mut chord: Vec<f64> = (0..m).map(|i| (q[(i + 1) % m] - q[i]).norm()).collect();
        let total: f64 = chord.iter().sum();
        if total <= 0.0 {
            return Err(SplineError::ClosureRejected("degenerate control polygon".into()));
        }
        // Zero-length chords would create empty spans.
        let floor = total * 1e-6 / m as f64;
        for c in chord.iter_mut() {
            if *c < floor {
                *c = floor;
            }
        }
        let total: f64 = chord.iter().sum();

        let mut breaks = vec![0.0; m + 1];
        for i in 0..m {
            breaks[i + 1] = breaks[i] + chord[i] / total;
        }
        breaks[m] = 1.0;

        let knots = periodic_knot_vector(&breaks, k);
        let closed = BSpline::closed_from_parts(k, KnotVector::new(knots)?, q)?;

        // Geometric deviation of the old curve from the new one.
        let (lo, hi) = self.domain();
        let mut max_dev: f64 = 0.0;
        for i in 0..=DEVIATION_SAMPLES {
            let u = lo + (hi - lo) * i as f64 / DEVIATION_SAMPLES as f64;
            let p = self.evaluate(u)?;
            max_dev = max_dev.max(closed.project(p).distance);
        }
        if max_dev > params.max_shape_deviation {
            return Err(SplineError::ClosureRejected(format!(
                "shape deviation {max_dev:.3} m exceeds {:.3} m",
                params.max_shape_deviation
            )));
        }
        Ok(closed)
    }
}
