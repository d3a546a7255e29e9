//! Map-accuracy metrics: RMSE to ground-truth cones with a 3 m missed rule,
//! and duplicate-landmark (ghost) counting for the discrete baseline.

use crate::ckf::LandmarkMap;
use crate::sim::TrackGroundTruth;
use crate::slam::JointBelief;

/// A ground-truth cone with no mapped point within this distance counts as
/// missed and is excluded from the RMSE.
pub const MISSED_THRESHOLD: f64 = 3.0;

/// Two map landmarks within this radius of one ground-truth cone count the
/// extra ones as ghosts.
pub const GHOST_RADIUS: f64 = 1.5;

/// RMSE over covered cones plus the missed fraction. `rmse` is `None` when
/// every cone is missed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub rmse: Option<f64>,
    pub missed_fraction: f64,
}

fn coverage_from_distances(distances: &[Option<f64>]) -> Coverage {
    let total = distances.len();
    let mut missed = 0usize;
    let mut sum_sq = 0.0;
    let mut kept = 0usize;
    for d in distances {
        match d {
            Some(d) if *d <= MISSED_THRESHOLD => {
                sum_sq += d * d;
                kept += 1;
            }
            _ => missed += 1,
        }
    }
    Coverage {
        rmse: if kept > 0 { Some((sum_sq / kept as f64).sqrt()) } else { None },
        missed_fraction: if total > 0 { missed as f64 / total as f64 } else { 0.0 },
    }
}

/// Spline-map coverage: the reference point for each cone is the closest
/// point along the same-label spline.
pub fn rmse_and_coverage_spline(belief: &JointBelief, truth: &TrackGroundTruth) -> Coverage {
    let distances: Vec<Option<f64>> = truth
        .all_cones()
        .map(|(label, cone)| belief.spline(label).map(|s| s.project(cone).distance))
        .collect();
    coverage_from_distances(&distances)
}

/// Landmark-map coverage: nearest same-label landmark per cone.
pub fn rmse_and_coverage_ckf(map: &LandmarkMap, truth: &TrackGroundTruth) -> Coverage {
    let distances: Vec<Option<f64>> = truth
        .all_cones()
        .map(|(label, cone)| {
            map.landmarks()
                .iter()
                .filter(|(l, _)| *l == label)
                .map(|(_, p)| (p - cone).norm())
                .min_by(|a, b| a.partial_cmp(b).expect("finite distance"))
        })
        .collect();
    coverage_from_distances(&distances)
}

/// Landmarks beyond the first within [`GHOST_RADIUS`] of each cone.
/// Continuous splines cannot ghost; their count is defined as zero.
pub fn count_ghosts(map: &LandmarkMap, truth: &TrackGroundTruth) -> usize {
    let mut ghosts = 0usize;
    for (label, cone) in truth.all_cones() {
        let near = map
            .landmarks()
            .iter()
            .filter(|(l, p)| *l == label && (p - cone).norm() <= GHOST_RADIUS)
            .count();
        ghosts += near.saturating_sub(1);
    }
    ghosts
}
