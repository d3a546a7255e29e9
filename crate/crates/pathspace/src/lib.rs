//! Continuous B-spline SLAM for sparse, labeled landmark environments.
//!
//! The map is a set of clamped cubic B-splines (one per boundary label) whose
//! control points live, together with the agent pose, in a single joint
//! Gaussian belief. Detections either extend a spline at its free end or are
//! fused into a "measurement spline" that updates the affected control points
//! through a plain linear Kalman step. A curvature-weighted simplification
//! keeps the number of control points bounded by scene complexity instead of
//! landmark count.
//!
//! The crate also ships the comparison baseline (a cubature Kalman filter
//! over discrete landmarks with Hungarian association), a synthetic
//! cone-track simulator, and the experiment harness used by the `pathspace`
//! CLI.

pub mod ckf;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geom;
pub mod metrics;
pub mod sim;
pub mod motion;
pub mod slam;
pub mod snapshot;
pub mod spline;
pub mod uncertainty;

pub use error::{FilterError, HarnessError, SimError, SplineError, UncertaintyError};
pub use slam::{Detection, JointBelief, PathSpaceConfig, PathSpaceFilter};
pub use geom::{normalize_angle, AgentPose, BoundaryLabel, Point2};

