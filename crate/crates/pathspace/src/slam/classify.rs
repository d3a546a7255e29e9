//! Detection classification (update vs expansion) and the proximity chain
//! that orders expansion candidates.

use std::collections::BTreeMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::{Detection, JointBelief};
use crate::geom::{BoundaryLabel, Point2};

/// Thresholds of the three-part expansion condition plus the association
/// guards around it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    /// Minimum distance from the spline endpoint before a detection may
    /// extend the curve.
    pub growth_threshold: f64,
    /// Minimum separation from the second-to-last control point.
    pub separation_threshold: f64,
    /// How close to u = 1 a projection must fall to count as "at the end".
    pub endpoint_u_tolerance: f64,
    /// Frontier rescue: a reading whose projection lands within this window
    /// of the end while sitting far off the curve is still an expansion
    /// candidate. Without it, growth deadlocks when occlusion stops the tip
    /// short and the next visible cones lie closer to an earlier parallel
    /// section than to the endpoint.
    pub frontier_u_window: f64,
    /// Minimum off-curve distance for the frontier branch.
    pub frontier_min_distance: f64,
    /// Update association gate: readings farther than this from the curve
    /// are dropped instead of dragging unrelated sections.
    pub max_update_distance: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            growth_threshold: 2.0,
            separation_threshold: 1.5,
            endpoint_u_tolerance: 1e-3,
            frontier_u_window: 0.25,
            frontier_min_distance: 4.0,
            max_update_distance: 4.0,
        }
    }
}

/// Per-label frame sets: world-frame points with world-frame covariances.
#[derive(Debug, Clone, Default)]
pub struct LabelSets {
    pub updates: Vec<(Point2, Matrix2<f64>)>,
    pub expansion: Vec<(Point2, Matrix2<f64>)>,
    /// Projections (u*) of the update-set points, used by loop closure.
    pub projections: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub per_label: BTreeMap<BoundaryLabel, LabelSets>,
    pub rejected: Vec<Detection>,
}

/// Sort detections into update and expansion sets. A detection expands its
/// spline iff it projects onto the terminal parameter, sits beyond the
/// growth threshold from S(1), and keeps separation from C_{n-1}. Closed
/// splines never yield expansion points; labels without a spline are
/// rejected records.
pub fn classify_detections(
    belief: &JointBelief,
    detections: &[Detection],
    params: &ClassifierParams,
) -> Classification {
    let pose = belief.pose();
    let rot = pose.rotation();
    let mut out = Classification::default();
    for d in detections {
        let Some(spline) = belief.spline(d.label) else {
            out.rejected.push(*d);
            continue;
        };
        let world = pose.to_world(d.position);
        let cov_world = rot * d.covariance * rot.transpose();
        let sets = out.per_label.entry(d.label).or_default();

        let proj = spline.project(world);
        let (lo, hi) = spline.domain();
        let span = hi - lo;
        let at_end = !spline.is_closed() && proj.u > hi - params.endpoint_u_tolerance;
        let at_frontier = !spline.is_closed()
            && proj.u > hi - params.frontier_u_window * span
            && proj.distance > params.frontier_min_distance;
        let expansion = if at_end || at_frontier {
            let endpoint = spline.evaluate(hi).expect("domain end");
            let n = spline.n_control();
            let prev = spline.control_points()[n - 2];
            (world - endpoint).norm() > params.growth_threshold
                && (world - prev).norm() > params.separation_threshold
        } else {
            false
        };

        if expansion {
            sets.expansion.push((world, cov_world));
        } else if proj.distance <= params.max_update_distance {
            sets.updates.push((world, cov_world));
            sets.projections.push(proj.u);
        } else {
            // Neither a frontier candidate nor close enough to fuse; it will
            // be mapped when the tip reaches its section.
            out.rejected.push(*d);
        }
    }
    out
}

/// Greedy proximity chain: start with the point nearest `endpoint`, then
/// repeatedly append the nearest remaining point to the last one. The caller
/// treats the final element as the extension point.
pub fn order_expansion_chain(
    points: &[(Point2, Matrix2<f64>)],
    endpoint: Point2,
) -> Vec<(Point2, Matrix2<f64>)> {
    let mut remaining: Vec<(Point2, Matrix2<f64>)> = points.to_vec();
    let mut chain = Vec::with_capacity(remaining.len());
    let mut cursor = endpoint;
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (i, (p - cursor).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"))
            .expect("non-empty");
        let next = remaining.remove(idx);
        cursor = next.0;
        chain.push(next);
    }
    chain
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[(f64, f64)]) -> Vec<(Point2, Matrix2<f64>)> {
        raw.iter().map(|&(x, y)| (Point2::new(x, y), Matrix2::identity() * 0.01)).collect()
    }

    #[test]
    fn single_point_is_the_extension_point() {
        let chain = order_expansion_chain(&pts(&[(3.0, 1.0)]), Point2::zeros());
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].0, Point2::new(3.0, 1.0));
    }

    #[test]
    fn collinear_points_keep_distance_order() {
        let chain = order_expansion_chain(&pts(&[(2.0, 0.0), (1.0, 0.0), (3.0, 0.0)]), Point2::zeros());
        let xs: Vec<f64> = chain.iter().map(|(p, _)| p.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn greedy_chain_matches_hand_enumeration() {
        // From (0,0): nearest is (1,0) at d=1; from there (2,0) at d=1 beats
        // (0,1.1) at d~1.487; (0,1.1) comes last and becomes the extension
        // point.
        let chain =
            order_expansion_chain(&pts(&[(1.0, 0.0), (0.0, 1.1), (2.0, 0.0)]), Point2::zeros());
        let got: Vec<(f64, f64)> = chain.iter().map(|(p, _)| (p.x, p.y)).collect();
        assert_eq!(got, vec![(1.0, 0.0), (2.0, 0.0), (0.0, 1.1)]);
    }
}
