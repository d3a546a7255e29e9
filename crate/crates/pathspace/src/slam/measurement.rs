//! Measurement-spline fitting: project readings onto the state spline, fit
//! the affected control points with an influence-weighted ridge regression,
//! and push the reading uncertainty through the (linear) fit by cubature.

use nalgebra::{DMatrix, DVector, Matrix2};

use super::{JointBelief, PathSpaceFilter};
use crate::error::FilterError;
use crate::geom::{BoundaryLabel, Point2};
use crate::uncertainty::{cubature_propagate, GaussianBelief};

/// A fitted measurement over a contiguous run of control points. For closed
/// splines the run wraps modulo the control count: the affected indices are
/// `(start + i) % n` for `i < len`.
#[derive(Debug, Clone)]
pub struct SplineMeasurement {
    /// Stacked fitted coordinates, interleaved x0, y0, x1, y1, ...
    pub control_values: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Sensitivity of the fitted values to the pose estimate they were
    /// transformed with (2*len x 3). The readings enter the fit in world
    /// coordinates computed at the pose mean, so a pose error shifts the
    /// fitted controls by this Jacobian; the Kalman update models it as
    /// negative pose columns in H, which is what makes the pose observable
    /// through spline measurements.
    pub pose_jacobian: DMatrix<f64>,
    pub start: usize,
    pub len: usize,
    pub label: BoundaryLabel,
}

/// Fit output: the measurement plus the projections (u values) of the
/// readings, which feed the loop-closure check.
#[derive(Debug, Clone)]
pub struct MeasurementFit {
    pub measurement: SplineMeasurement,
    pub projections: Vec<f64>,
}

impl PathSpaceFilter {
    /// Build the measurement spline for one label from world-frame update
    /// points. Projections onto the current mean spline are frozen and the
    /// fit is linear in the readings, so the cubature pass is exact.
    pub fn fit_measurement_spline(
        &self,
        label: BoundaryLabel,
        updates: &[(Point2, Matrix2<f64>)],
        lambda: f64,
    ) -> Result<MeasurementFit, FilterError> {
        fit_measurement_spline(self.belief(), label, updates, lambda, self.config.fit_noise_floor)
    }
}

pub(crate) fn fit_measurement_spline(
    belief: &JointBelief,
    label: BoundaryLabel,
    updates: &[(Point2, Matrix2<f64>)],
    lambda: f64,
    noise_floor: f64,
) -> Result<MeasurementFit, FilterError> {
    if updates.is_empty() {
        return Err(FilterError::InvalidArgument("empty update set".into()));
    }
    if lambda <= 0.0 {
        return Err(FilterError::InvalidArgument("lambda must be positive".into()));
    }
    let spline = belief
        .spline(label)
        .ok_or_else(|| FilterError::InvalidState(format!("no spline for {label}")))?;
    let n_ctrl = spline.n_control();
    let m = updates.len();

    // Projections and basis rows on the mean spline.
    let mut projections = Vec::with_capacity(m);
    let mut supports: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for (p, _) in updates {
        let proj = spline.project(*p);
        projections.push(proj.u);
        supports.push(spline.support(proj.u).map_err(FilterError::from)?);
    }

    // Contiguous affected range (circular for closed splines).
    let mut touched: Vec<usize> = supports.iter().flatten().map(|(i, _)| *i).collect();
    touched.sort_unstable();
    touched.dedup();
    let (start, len) = contiguous_range(&touched, n_ctrl, spline.is_closed());

    // Reading basis matrix over the affected columns.
    let mut basis = DMatrix::zeros(m, len);
    for (row, support) in supports.iter().enumerate() {
        for &(idx, w) in support {
            let col = (idx + n_ctrl - start) % n_ctrl;
            debug_assert!(col < len, "support outside affected range");
            basis[(row, col)] += w;
        }
    }

    // Influence-weighted regularizer: columns that carry more basis mass are
    // regularized less, biasing them to travel further in the fit.
    let ones_m = DVector::from_element(m, 1.0);
    let col_mass = basis.transpose() * &ones_m / m as f64;
    let reg: DVector<f64> = col_mass.map(|v| lambda * (1.0 - v));

    let mut normal = basis.transpose() * &basis;
    for i in 0..len {
        normal[(i, i)] += reg[i];
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| FilterError::Numeric("singular measurement-fit system".into()))?;
    let gain = chol.solve(&basis.transpose()); // len x m

    // Prior pull toward the current control points.
    let prior: Vec<Point2> =
        (0..len).map(|i| spline.control_points()[(start + i) % n_ctrl]).collect();
    let mut prior_x = DVector::zeros(len);
    let mut prior_y = DVector::zeros(len);
    for i in 0..len {
        prior_x[i] = reg[i] * prior[i].x;
        prior_y[i] = reg[i] * prior[i].y;
    }
    let pull_x = chol.solve(&prior_x);
    let pull_y = chol.solve(&prior_y);

    let solve = |readings: &DVector<f64>| -> DVector<f64> {
        // readings interleaved x0, y0, ...
        let mut ys_x = DVector::zeros(m);
        let mut ys_y = DVector::zeros(m);
        for i in 0..m {
            ys_x[i] = readings[2 * i];
            ys_y[i] = readings[2 * i + 1];
        }
        let cx = &gain * ys_x + &pull_x;
        let cy = &gain * ys_y + &pull_y;
        let mut out = DVector::zeros(2 * len);
        for i in 0..len {
            out[2 * i] = cx[i];
            out[2 * i + 1] = cy[i];
        }
        out
    };

    // Reading belief: stacked detection coordinates with block-diagonal
    // sensor covariance.
    let mut mean = DVector::zeros(2 * m);
    let mut cov = DMatrix::zeros(2 * m, 2 * m);
    for (i, (p, c)) in updates.iter().enumerate() {
        mean[2 * i] = p.x;
        mean[2 * i + 1] = p.y;
        cov.view_mut((2 * i, 2 * i), (2, 2)).copy_from(c);
    }
    let reading_belief = GaussianBelief::new(mean.clone(), cov)
        .map_err(FilterError::from)?;
    let propagated = cubature_propagate(&reading_belief, |x| Ok(solve(x)))
        .map_err(FilterError::from)?;

    // The propagated covariance has rank at most 2m; readings claim exact
    // knowledge along its null space, which the frozen-projection
    // linearization cannot justify. A small diagonal floor keeps the
    // innovation covariance invertible.
    let mut covariance = propagated.covariance;
    for i in 0..2 * len {
        covariance[(i, i)] += noise_floor;
    }

    // First-order pose sensitivity of the fitted values: readings were
    // placed in the world frame with the current pose mean, so the fit
    // inherits [I | Rot90 lever] per reading through the linear gain.
    let pose = belief.pose();
    let gain2 = crate::uncertainty::interleave2(&gain);
    let mut j_stack = DMatrix::zeros(2 * m, 3);
    for (i, (p, _)) in updates.iter().enumerate() {
        let lever = p - pose.position();
        j_stack[(2 * i, 0)] = 1.0;
        j_stack[(2 * i, 2)] = -lever.y;
        j_stack[(2 * i + 1, 1)] = 1.0;
        j_stack[(2 * i + 1, 2)] = lever.x;
    }
    let pose_jacobian = gain2 * j_stack;

    let measurement = SplineMeasurement {
        control_values: solve(&mean),
        covariance,
        pose_jacobian,
        start,
        len,
        label,
    };
    Ok(MeasurementFit { measurement, projections })
}

/// Smallest contiguous index range covering `touched`. Open splines take
/// [min, max]; closed splines pick the circular range complementary to the
/// largest gap.
fn contiguous_range(touched: &[usize], n: usize, closed: bool) -> (usize, usize) {
    debug_assert!(!touched.is_empty());
    if !closed {
        let lo = touched[0];
        let hi = touched[touched.len() - 1];
        return (lo, hi - lo + 1);
    }
    if touched.len() == n {
        return (0, n);
    }
    // Largest circular gap between consecutive touched indices.
    let mut best_gap = 0usize;
    let mut best_after = 0usize; // index (into touched) that follows the gap
    for i in 0..touched.len() {
        let cur = touched[i];
        let prev = touched[(i + touched.len() - 1) % touched.len()];
        let gap = (cur + n - prev) % n;
        if gap > best_gap {
            best_gap = gap;
            best_after = i;
        }
    }
    let start = touched[best_after];
    let end = touched[(best_after + touched.len() - 1) % touched.len()];
    let len = (end + n - start) % n + 1;
    (start, len)
}

#[cfg(test)]
mod tests {
    use super::contiguous_range;

    #[test]
    fn open_range_spans_min_to_max() {
        assert_eq!(contiguous_range(&[2, 3, 5], 10, false), (2, 4));
        assert_eq!(contiguous_range(&[7], 10, false), (7, 1));
    }

    #[test]
    fn closed_range_wraps_around_the_seam() {
        // Touched near the seam of a 10-point loop: 8, 9, 0, 1.
        assert_eq!(contiguous_range(&[0, 1, 8, 9], 10, true), (8, 4));
        // No wrap needed.
        assert_eq!(contiguous_range(&[3, 4, 5], 10, true), (3, 3));
        // Everything touched.
        assert_eq!(contiguous_range(&(0..10).collect::<Vec<_>>(), 10, true), (0, 10));
    }
}
