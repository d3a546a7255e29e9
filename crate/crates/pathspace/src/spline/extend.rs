//! Endpoint extension: unclamp the terminal knot, recompute the local
//! control points so the existing shape is untouched, append the target as
//! the new end control point and re-clamp around it.

use nalgebra::DMatrix;

use super::{ders_basis_funs, find_span, BSpline, KnotVector};
use crate::error::SplineError;
use crate::geom::Point2;

/// Outcome of [`BSpline::extend_to_point`]. `new_index` is `None` when the
/// target coincided with the current endpoint and nothing changed.
#[derive(Debug, Clone)]
pub struct Extension {
    pub spline: BSpline,
    pub new_index: Option<usize>,
    /// Linear map of the unclamping recomputation: the last `order - 1` new
    /// control points as a combination of the last `order` old ones. Rows
    /// index the recomputed points (control n-k+2 ..= n), columns the old
    /// points (n-k+1 ..= n). Belief owners propagate covariance through it.
    pub tip_transform: Option<DMatrix<f64>>,
}

const COINCIDENT_EPS: f64 = 1e-9;

impl BSpline {
    /// Extend the curve so that it ends exactly at `new_point`, preserving
    /// the shape over the old domain. The terminal knot span is sized
    /// proportionally to the chord |new_point - C_n|.
    pub fn extend_to_point(&self, new_point: Point2) -> Result<Extension, SplineError> {
        if self.is_closed() {
            return Err(SplineError::InvalidConfiguration(
                "cannot extend a closed spline".into(),
            ));
        }
        if !self.is_clamped_right() {
            return Err(SplineError::InvalidConfiguration(
                "extension requires a right-clamped spline".into(),
            ));
        }
        let n = self.n_control() - 1;
        let end = self.control_points()[n];
        if (new_point - end).norm() < COINCIDENT_EPS {
            return Ok(Extension { spline: self.clone(), new_index: None, tip_transform: None });
        }

        let k = self.order();
        let degree = self.degree();
        let (lo, hi) = self.domain();

        // End derivatives of the existing curve, orders 0..=k-2, expressed
        // as a linear map over the last `k` old control points.
        let old_rep = self.rep();
        let old_span = old_rep.find_span(hi);
        let old_ders = ders_basis_funs(&old_rep.knots, old_span, degree, hi, k - 2);
        debug_assert_eq!(old_span, n);
        let mut der_map = DMatrix::zeros(k - 1, k);
        for r in 0..k - 1 {
            for c in 0..k {
                der_map[(r, c)] = old_ders[r][c];
            }
        }
        let mut end_ders: Vec<Point2> = Vec::with_capacity(k - 1);
        for r in 0..k - 1 {
            let mut d = Point2::zeros();
            for c in 0..k {
                d += self.control_points()[old_span - degree + c] * der_map[(r, c)];
            }
            end_ders.push(d);
        }

        // Chord-length-proportional spacing for the new terminal span.
        let chord_total: f64 = self
            .control_points()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum();
        let chord_new = (new_point - end).norm();
        let delta = if chord_total > 0.0 {
            (hi - lo) * chord_new / chord_total
        } else {
            hi - lo
        };

        // Old knots end with `k` copies of `hi`; the extended vector keeps a
        // single `hi` (now interior) and clamps at `hi + delta`.
        let old = self.knots().values();
        let kept = &old[..old.len() - k];
        let mut knots: Vec<f64> = kept.to_vec();
        knots.push(hi);
        knots.extend(std::iter::repeat(hi + delta).take(k));

        let mut ctrl: Vec<Point2> = vec![Point2::zeros(); n + 2];
        // Basis functions supported inside the old domain keep their
        // coefficients.
        for (i, c) in self.control_points().iter().enumerate().take(n + 2 - k) {
            ctrl[i] = *c;
        }

        // The k-1 unclamped control points are pinned by matching the curve
        // value and derivatives at the (now interior) knot `hi`.
        let span = find_span(&knots, degree, hi);
        debug_assert_eq!(span, n + 1);
        let ders = ders_basis_funs(&knots, span, degree, hi, k - 2);
        let m = k - 1;
        let mut mat = DMatrix::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                // Unknown j = span - degree + c, i.e. indices n-k+2 ..= n.
                mat[(r, c)] = ders[r][c];
            }
        }
        let lu = mat.clone().lu();
        // Full unclamping map: new tip controls = T * last k old controls.
        let tip_transform = lu.solve(&der_map).ok_or_else(|| {
            SplineError::InvalidConfiguration("singular unclamping system".into())
        })?;
        for r in 0..m {
            let mut p = Point2::zeros();
            for c in 0..k {
                p += self.control_points()[n + 1 - k + c] * tip_transform[(r, c)];
            }
            ctrl[span - degree + r] = p;
        }
        ctrl[n + 1] = new_point;
        // Consistency of the transform with the derivative conditions.
        debug_assert!({
            let check: Point2 = (0..m).map(|c| ctrl[span - degree + c] * mat[(0, c)]).sum();
            (check - end_ders[0]).norm() < 1e-6 * (1.0 + end_ders[0].norm())
        });

        // Re-normalize the parameter domain to [0, 1].
        let span_len = hi + delta - knots[0];
        let start = knots[0];
        for t in knots.iter_mut() {
            *t = (*t - start) / span_len;
        }

        let spline = BSpline::from_parts(k, KnotVector::new(knots)?, ctrl)?;
        Ok(Extension { spline, new_index: Some(n + 1), tip_transform: Some(tip_transform) })
    }

    /// Extend by reducing the terminal knot multiplicity, appending the
    /// target as the new end control point and re-clamping, with the
    /// existing control points left untouched.
    ///
    /// Unlike [`BSpline::extend_to_point`] this does not reproduce the old
    /// curve exactly over its domain: the region near the old tip relaxes
    /// toward the control polygon (a few decimeters at track scale). In
    /// exchange the end tangent stays data-anchored: repeated exact
    /// extensions amplify end-derivative error by roughly a factor of three
    /// per step, which diverges even on noiseless inputs, while repeated
    /// appends keep a small bounded secant bias.
    pub fn append_control_point(&self, new_point: Point2) -> Result<Extension, SplineError> {
        if self.is_closed() {
            return Err(SplineError::InvalidConfiguration(
                "cannot extend a closed spline".into(),
            ));
        }
        if !self.is_clamped_right() {
            return Err(SplineError::InvalidConfiguration(
                "extension requires a right-clamped spline".into(),
            ));
        }
        let n = self.n_control() - 1;
        let end = self.control_points()[n];
        if (new_point - end).norm() < COINCIDENT_EPS {
            return Ok(Extension { spline: self.clone(), new_index: None, tip_transform: None });
        }
        let k = self.order();
        let (lo, hi) = self.domain();
        let chord_total: f64 = self
            .control_points()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum();
        let chord_new = (new_point - end).norm();
        let delta = if chord_total > 0.0 {
            (hi - lo) * chord_new / chord_total
        } else {
            hi - lo
        };
        let old = self.knots().values();
        let mut knots: Vec<f64> = old[..old.len() - k].to_vec();
        knots.push(hi);
        knots.extend(std::iter::repeat(hi + delta).take(k));
        let span_len = hi + delta - knots[0];
        let start = knots[0];
        for t in knots.iter_mut() {
            *t = (*t - start) / span_len;
        }
        let mut ctrl = self.control_points().to_vec();
        ctrl.push(new_point);
        let spline = BSpline::from_parts(k, KnotVector::new(knots)?, ctrl)?;
        Ok(Extension { spline, new_index: Some(n + 1), tip_transform: None })
    }
}
