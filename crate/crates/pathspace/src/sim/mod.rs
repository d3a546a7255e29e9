//! Synthetic cone-track world: closed-circuit generation from straight,
//! arc, and chicane elements; a range/FOV sensor with dropouts and Gaussian
//! position noise; and a pure-pursuit vehicle emitting noisy body-frame
//! odometry. All randomness flows from one seeded generator.

mod drive;

pub use drive::{drive_step, Simulation, SimFrame};

use std::collections::BTreeMap;

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geom::{normalize_angle, AgentPose, BoundaryLabel, Point2};
use crate::slam::Detection;

/// One centerline element. Arcs turn left for positive angles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrackElement {
    Straight { length: f64 },
    Arc { radius: f64, angle: f64 },
}

/// Track recipe: element list plus cone geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSpec {
    pub track_width: f64,
    pub cone_spacing: f64,
    pub elements: Vec<TrackElement>,
    pub seed: u64,
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self::fsd_style()
    }
}

impl TrackSpec {
    /// Default circuit: two long straights with chicanes, three tight
    /// hairpins (one of them a right-hander folding a finger into the
    /// infield), and two 90-degree corners closing the loop. About 484 m of
    /// centerline, just under 200 cones at 5 m spacing.
    pub fn fsd_style() -> Self {
        use TrackElement::{Arc, Straight};
        let quarter = std::f64::consts::FRAC_PI_4;
        let half = std::f64::consts::PI;
        let right = std::f64::consts::FRAC_PI_2;
        let chicane = |r: f64| {
            [
                Arc { radius: r, angle: -quarter },
                Arc { radius: r, angle: quarter },
                Arc { radius: r, angle: quarter },
                Arc { radius: r, angle: -quarter },
            ]
        };
        let mut elements = vec![Straight { length: 90.0 }];
        elements.extend(chicane(6.0));
        elements.push(Straight { length: 65.0 });
        elements.push(Arc { radius: 7.0, angle: half });
        elements.push(Straight { length: 50.0 });
        elements.push(Arc { radius: 5.0, angle: -half });
        elements.push(Straight { length: 20.0 });
        elements.push(Arc { radius: 5.0, angle: half });
        elements.push(Straight { length: 25.0 });
        elements.extend(chicane(6.0));
        elements.push(Straight { length: 100.0 });
        elements.push(Arc { radius: 8.0, angle: right });
        elements.push(Straight { length: 18.0 });
        elements.push(Arc { radius: 8.0, angle: right });
        Self { track_width: 4.0, cone_spacing: 5.0, elements, seed: 0 }
    }
}

/// Ground truth: dense centerline polyline, per-label cone lists, and the
/// exact centerline lap length.
#[derive(Debug, Clone)]
pub struct TrackGroundTruth {
    pub centerline: Vec<Point2>,
    pub cones: BTreeMap<BoundaryLabel, Vec<Point2>>,
    pub lap_length: f64,
}

impl TrackGroundTruth {
    pub fn all_cones(&self) -> impl Iterator<Item = (BoundaryLabel, Point2)> + '_ {
        self.cones.iter().flat_map(|(l, v)| v.iter().map(move |p| (*l, *p)))
    }

    pub fn cone_count(&self) -> usize {
        self.cones.values().map(Vec::len).sum()
    }
}

const CENTERLINE_STEP: f64 = 0.5;
const CLOSURE_POS_TOL: f64 = 1e-6;
const CLOSURE_HEADING_TOL: f64 = 1e-9;

/// Build the ground truth for a spec. The element chain must return to the
/// start pose; cones sit at +-width/2 offsets every `cone_spacing` along
/// each boundary's own arc length. Blue is the left boundary.
pub fn generate_track(spec: &TrackSpec) -> Result<TrackGroundTruth, SimError> {
    if spec.track_width <= 0.0 || spec.cone_spacing <= 0.0 {
        return Err(SimError::InvalidSpec("width and spacing must be positive".into()));
    }
    if spec.elements.is_empty() {
        return Err(SimError::InvalidSpec("element list is empty".into()));
    }
    for e in &spec.elements {
        match e {
            TrackElement::Straight { length } if *length <= 0.0 => {
                return Err(SimError::InvalidSpec("straight length must be positive".into()))
            }
            TrackElement::Arc { radius, .. } if *radius <= spec.track_width / 2.0 => {
                return Err(SimError::InvalidSpec(
                    "arc radius must exceed half the track width".into(),
                ))
            }
            _ => {}
        }
    }

    // Closure check on the exact element chain.
    let mut pose = AgentPose::origin();
    let mut lap_length = 0.0;
    for e in &spec.elements {
        pose = advance(pose, e, 1.0);
        lap_length += element_length(e);
    }
    let gap = pose.position().norm();
    let heading_gap = normalize_angle(pose.heading).abs();
    if gap > CLOSURE_POS_TOL || heading_gap > CLOSURE_HEADING_TOL {
        return Err(SimError::NotClosed { gap, heading_gap });
    }

    // Dense centerline polyline.
    let mut centerline = Vec::new();
    let mut cursor = AgentPose::origin();
    for e in &spec.elements {
        let len = element_length(e);
        let steps = (len / CENTERLINE_STEP).ceil() as usize;
        for i in 0..steps {
            let frac = i as f64 / steps as f64;
            centerline.push(advance(cursor, e, frac).position());
        }
        cursor = advance(cursor, e, 1.0);
    }

    // Cones along each boundary's own offset curve.
    let mut cones = BTreeMap::new();
    for (label, side) in [(BoundaryLabel::Blue, 1.0), (BoundaryLabel::Yellow, -1.0)] {
        let offset = side * spec.track_width / 2.0;
        let mut list = Vec::new();
        let mut cursor = AgentPose::origin();
        // First cone half a spacing in, so the seam gap is symmetric.
        let mut next_at = spec.cone_spacing / 2.0;
        for e in &spec.elements {
            let blen = boundary_length(e, offset);
            while next_at < blen {
                let frac = next_at / blen;
                let p = advance(cursor, e, frac);
                list.push(offset_point(&p, offset));
                next_at += spec.cone_spacing;
            }
            next_at -= blen;
            cursor = advance(cursor, e, 1.0);
        }
        cones.insert(label, list);
    }

    Ok(TrackGroundTruth { centerline, cones, lap_length })
}

fn element_length(e: &TrackElement) -> f64 {
    match e {
        TrackElement::Straight { length } => *length,
        TrackElement::Arc { radius, angle } => radius * angle.abs(),
    }
}

/// Arc length of the boundary offset curve for this element. A left offset
/// (positive) shortens left turns and lengthens right turns.
fn boundary_length(e: &TrackElement, offset: f64) -> f64 {
    match e {
        TrackElement::Straight { length } => *length,
        TrackElement::Arc { radius, angle } => {
            let r = if *angle >= 0.0 { radius - offset } else { radius + offset };
            r * angle.abs()
        }
    }
}

/// Pose after traversing a fraction of the element.
fn advance(start: AgentPose, e: &TrackElement, frac: f64) -> AgentPose {
    match e {
        TrackElement::Straight { length } => {
            let (s, c) = start.heading.sin_cos();
            AgentPose::new(
                start.x + c * length * frac,
                start.y + s * length * frac,
                start.heading,
            )
        }
        TrackElement::Arc { radius, angle } => {
            let turn = angle * frac;
            let side = angle.signum();
            // Center sits to the left (positive angle) or right of travel.
            let normal = start.heading + side * std::f64::consts::FRAC_PI_2;
            let cx = start.x + radius * normal.cos();
            let cy = start.y + radius * normal.sin();
            let from_center = (start.x - cx, start.y - cy);
            let (s, c) = turn.sin_cos();
            AgentPose::new(
                cx + c * from_center.0 - s * from_center.1,
                cy + s * from_center.0 + c * from_center.1,
                start.heading + turn,
            )
        }
    }
}

/// Point on the boundary at signed lateral offset from the pose (+left).
fn offset_point(pose: &AgentPose, offset: f64) -> Point2 {
    let n = pose.heading + std::f64::consts::FRAC_PI_2;
    Point2::new(pose.x + offset * n.cos(), pose.y + offset * n.sin())
}

/// Range/FOV sensor with per-cone dropouts and isotropic Gaussian position
/// noise in the agent frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub max_range: f64,
    pub field_of_view: f64,
    pub position_noise_std: f64,
    pub detection_probability: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            max_range: 12.0,
            field_of_view: 110f64.to_radians(),
            position_noise_std: 0.1,
            detection_probability: 0.9,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.max_range <= 0.0
            || self.field_of_view <= 0.0
            || self.position_noise_std < 0.0
            || !(0.0..=1.0).contains(&self.detection_probability)
        {
            return Err(SimError::InvalidSpec("sensor parameters out of range".into()));
        }
        Ok(())
    }

    /// Geometric visibility before dropouts and noise.
    pub fn in_sector(&self, pose: &AgentPose, cone: Point2) -> bool {
        let local = pose.to_agent(cone);
        let range = local.norm();
        if range > self.max_range {
            return false;
        }
        local.y.atan2(local.x).abs() <= self.field_of_view / 2.0
    }
}

/// Sample one frame of detections.
pub fn sense(
    pose: &AgentPose,
    truth: &TrackGroundTruth,
    model: &SensorModel,
    rng: &mut impl Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();
    let std = model.position_noise_std;
    for (label, cone) in truth.all_cones() {
        if !model.in_sector(pose, cone) {
            continue;
        }
        if rng.random_range(0.0..1.0) >= model.detection_probability {
            continue;
        }
        let local = pose.to_agent(cone);
        let noisy = if std > 0.0 {
            let dx: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * std;
            let dy: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * std;
            local + Point2::new(dx, dy)
        } else {
            local
        };
        out.push(Detection {
            position: noisy,
            label,
            covariance: Matrix2::identity() * std * std,
        });
    }
    out
}
