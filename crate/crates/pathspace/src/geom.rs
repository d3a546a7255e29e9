//! Small planar-geometry vocabulary shared across the crate.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// 2D point / vector in meters.
pub type Point2 = Vector2<f64>;

/// Semantic boundary id carried by cones and splines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryLabel {
    Blue,
    Yellow,
    /// Start-zone cones; not part of any tracked boundary.
    Orange,
}

impl std::fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryLabel::Blue => write!(f, "blue"),
            BoundaryLabel::Yellow => write!(f, "yellow"),
            BoundaryLabel::Orange => write!(f, "orange"),
        }
    }
}

/// Planar agent pose. Heading is normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl AgentPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0, heading: 0.0 }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// World-frame rotation of the agent frame.
    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.heading.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// Map a point expressed in the agent frame into the world frame.
    pub fn to_world(&self, local: Point2) -> Point2 {
        self.position() + self.rotation() * local
    }

    /// Map a world point into the agent frame.
    pub fn to_agent(&self, world: Point2) -> Point2 {
        self.rotation().transpose() * (world - self.position())
    }

    /// Compose the pose with a body-frame displacement (forward, lateral, dheading).
    pub fn compose(&self, delta: [f64; 3]) -> Self {
        let step = self.rotation() * Point2::new(delta[0], delta[1]);
        Self::new(self.x + step.x, self.y + step.y, self.heading + delta[2])
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
