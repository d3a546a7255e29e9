//! Versioned JSON snapshots of beliefs and tracks, for harness logging and
//! golden tests. Covariances are stored as the row-major lower triangle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ckf::LandmarkMap;
use crate::error::HarnessError;
use crate::geom::{AgentPose, BoundaryLabel, Point2};
use crate::sim::TrackGroundTruth;
use crate::slam::JointBelief;
use crate::spline::{BSpline, KnotVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseSnapshot {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl From<AgentPose> for PoseSnapshot {
    fn from(p: AgentPose) -> Self {
        Self { x: p.x, y: p.y, heading: p.heading }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineSnapshot {
    pub label: BoundaryLabel,
    pub order: usize,
    pub closed: bool,
    pub knots: Vec<f64>,
    pub control_points: Vec<[f64; 2]>,
}

/// Belief snapshot of the spline backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub schema_version: u32,
    pub kind: String,
    pub pose: PoseSnapshot,
    pub splines: Vec<SplineSnapshot>,
    /// Row-major lower triangle of the joint covariance
    /// [pose(3) | control coordinates...].
    pub covariance_lower: Vec<f64>,
}

impl BeliefSnapshot {
    pub fn capture(belief: &JointBelief) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "pathspace".into(),
            pose: belief.pose().into(),
            splines: belief
                .splines()
                .map(|(label, s)| SplineSnapshot {
                    label,
                    order: s.order(),
                    closed: s.is_closed(),
                    knots: s.knots().values().to_vec(),
                    control_points: s.control_points().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
            covariance_lower: lower_triangle(belief.covariance()),
        }
    }

    /// Rebuild the spline set (pose and geometry; the covariance stays in
    /// its serialized triangle form).
    pub fn splines(&self) -> Result<Vec<(BoundaryLabel, BSpline)>, HarnessError> {
        self.splines
            .iter()
            .map(|s| {
                let ctrl: Vec<Point2> =
                    s.control_points.iter().map(|c| Point2::new(c[0], c[1])).collect();
                let knots = KnotVector::new(s.knots.clone())
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                let spline = if s.closed {
                    BSpline::closed_from_parts(s.order, knots, ctrl)
                } else {
                    BSpline::from_parts(s.order, knots, ctrl)
                }
                .map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok((s.label, spline))
            })
            .collect()
    }
}

/// Landmark-list snapshot variant for the baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkSnapshot {
    pub schema_version: u32,
    pub kind: String,
    pub pose: PoseSnapshot,
    pub landmarks: Vec<(BoundaryLabel, [f64; 2])>,
    pub covariance_lower: Vec<f64>,
}

impl LandmarkSnapshot {
    pub fn capture(map: &LandmarkMap) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "ckf".into(),
            pose: map.pose.into(),
            landmarks: map.landmarks().iter().map(|(l, p)| (*l, [p.x, p.y])).collect(),
            covariance_lower: lower_triangle(map.covariance()),
        }
    }
}

/// Track export so experiments can pin a fixed ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub schema_version: u32,
    pub lap_length: f64,
    pub centerline: Vec<[f64; 2]>,
    pub cones: BTreeMap<BoundaryLabel, Vec<[f64; 2]>>,
}

impl TrackSnapshot {
    pub fn capture(truth: &TrackGroundTruth) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            lap_length: truth.lap_length,
            centerline: truth.centerline.iter().map(|p| [p.x, p.y]).collect(),
            cones: truth
                .cones
                .iter()
                .map(|(l, v)| (*l, v.iter().map(|p| [p.x, p.y]).collect()))
                .collect(),
        }
    }

    pub fn restore(&self) -> Result<TrackGroundTruth, HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported track schema_version {}",
                self.schema_version
            )));
        }
        Ok(TrackGroundTruth {
            centerline: self.centerline.iter().map(|c| Point2::new(c[0], c[1])).collect(),
            cones: self
                .cones
                .iter()
                .map(|(l, v)| (*l, v.iter().map(|c| Point2::new(c[0], c[1])).collect()))
                .collect(),
            lap_length: self.lap_length,
        })
    }
}

fn lower_triangle(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}
