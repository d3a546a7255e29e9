//! Pure-pursuit vehicle on the centerline, emitting noisy body-frame
//! odometry.

use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{sense, SensorModel, TrackGroundTruth};
use crate::geom::{normalize_angle, AgentPose, Point2};
use crate::slam::Detection;
use crate::uncertainty::robust_cholesky;

const LOOKAHEAD: f64 = 4.0;
const MAX_TURN_PER_STEP: f64 = 0.6;

/// One kinematic step of the pursuit controller.
///
/// Returns the new pose plus the noisy body-frame odometry
/// (forward, lateral, dheading). With zero speed the pose is unchanged and
/// only odometry noise is emitted.
pub fn drive_step(
    pose: &AgentPose,
    truth: &TrackGroundTruth,
    speed: f64,
    dt: f64,
    odo_noise: &Matrix3<f64>,
    rng: &mut impl Rng,
) -> (AgentPose, [f64; 3]) {
    let hint = nearest_index(truth, pose.position(), None);
    let (next, odo, _) = drive_step_hinted(pose, truth, speed, dt, odo_noise, rng, hint);
    (next, odo)
}

fn nearest_index(truth: &TrackGroundTruth, p: Point2, hint: Option<usize>) -> usize {
    let n = truth.centerline.len();
    let (lo, hi) = match hint {
        // The vehicle advances a few points per step at most.
        Some(h) => (h, h + 40),
        None => (0, n),
    };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for k in lo..hi {
        let i = k % n;
        let d = (truth.centerline[i] - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn drive_step_hinted(
    pose: &AgentPose,
    truth: &TrackGroundTruth,
    speed: f64,
    dt: f64,
    odo_noise: &Matrix3<f64>,
    rng: &mut impl Rng,
    hint: usize,
) -> (AgentPose, [f64; 3], usize) {
    let n = truth.centerline.len();
    let step_len = truth.lap_length / n as f64;
    let idx = nearest_index(truth, pose.position(), Some(hint));

    let mut new_pose = *pose;
    let mut true_odo = [0.0, 0.0, 0.0];
    if speed > 0.0 && dt > 0.0 {
        let ahead = ((LOOKAHEAD / step_len).ceil() as usize).max(1);
        let target = truth.centerline[(idx + ahead) % n];
        let local = pose.to_agent(target);
        let alpha = local.y.atan2(local.x);
        let dist = local.norm().max(1e-6);
        let curvature = 2.0 * alpha.sin() / dist;
        let dtheta = (curvature * speed * dt).clamp(-MAX_TURN_PER_STEP, MAX_TURN_PER_STEP);
        // Exact arc integration of the step.
        let mid = pose.heading + dtheta / 2.0;
        let delta_world = Point2::new(mid.cos(), mid.sin()) * speed * dt;
        new_pose = AgentPose::new(
            pose.x + delta_world.x,
            pose.y + delta_world.y,
            pose.heading + dtheta,
        );
        let local_disp = pose.rotation().transpose() * delta_world;
        true_odo = [local_disp.x, local_disp.y, dtheta];
    }

    // Odometry noise sampled through the Cholesky factor of the covariance.
    let mut odo = true_odo;
    if odo_noise.iter().any(|&v| v != 0.0) {
        let dyn_noise = nalgebra::DMatrix::from_fn(3, 3, |i, j| odo_noise[(i, j)]);
        if let Ok(l) = robust_cholesky(&dyn_noise) {
            let z: [f64; 3] = [
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            ];
            for i in 0..3 {
                for j in 0..3 {
                    odo[i] += l[(i, j)] * z[j];
                }
            }
        }
    }

    (new_pose, odo, idx)
}

/// One simulated perception frame.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub odometry: [f64; 3],
    pub detections: Vec<Detection>,
    pub true_pose: AgentPose,
    /// Unwrapped centerline arc-length progress in meters.
    pub progress: f64,
}

/// Deterministic closed-loop simulation: pursuit driving, sensing, and the
/// centerline arc-length odometer used for lap accounting.
pub struct Simulation {
    truth: TrackGroundTruth,
    sensor: SensorModel,
    pose: AgentPose,
    speed: f64,
    dt: f64,
    odo_noise: Matrix3<f64>,
    rng: ChaCha8Rng,
    hint: usize,
    laps_progressed: usize,
}

impl Simulation {
    pub fn new(
        truth: TrackGroundTruth,
        sensor: SensorModel,
        speed: f64,
        dt: f64,
        odo_noise: Matrix3<f64>,
        seed: u64,
    ) -> Self {
        Self {
            truth,
            sensor,
            pose: AgentPose::origin(),
            speed,
            dt,
            odo_noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            hint: 0,
            laps_progressed: 0,
        }
    }

    pub fn truth(&self) -> &TrackGroundTruth {
        &self.truth
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }

    pub fn step(&mut self) -> SimFrame {
        let (next, odo, idx) = drive_step_hinted(
            &self.pose,
            &self.truth,
            self.speed,
            self.dt,
            &self.odo_noise,
            &mut self.rng,
            self.hint,
        );
        // Unwrap the centerline index into monotone progress.
        let n = self.truth.centerline.len();
        if idx + n / 2 < self.hint {
            self.laps_progressed += 1;
        }
        self.hint = idx;
        self.pose = next;
        let step_len = self.truth.lap_length / n as f64;
        let progress = (self.laps_progressed * n + idx) as f64 * step_len;
        let detections = sense(&self.pose, &self.truth, &self.sensor, &mut self.rng);
        SimFrame { odometry: odo, detections, true_pose: self.pose, progress }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_track, TrackSpec};

    #[test]
    fn zero_speed_stays_put_with_pure_noise_odometry() {
        let truth = generate_track(&TrackSpec::default()).unwrap();
        let pose = AgentPose::new(1.0, 2.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Matrix3::identity() * 1e-4;
        let (next, odo) = drive_step(&pose, &truth, 0.0, 0.1, &noise, &mut rng);
        assert_eq!(next, pose);
        assert!(odo.iter().all(|v| v.abs() < 0.1));
    }

    #[test]
    fn zero_noise_odometry_equals_true_displacement() {
        let truth = generate_track(&TrackSpec::default()).unwrap();
        let pose = AgentPose::origin();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, odo) = drive_step(&pose, &truth, 5.0, 0.1, &Matrix3::zeros(), &mut rng);
        let recomposed = pose.compose(odo);
        assert!((recomposed.position() - next.position()).norm() < 1e-12);
        assert!((normalize_angle(recomposed.heading - next.heading)).abs() < 1e-12);
    }

    #[test]
    fn one_lap_path_length_matches_the_track() {
        let truth = generate_track(&TrackSpec::default()).unwrap();
        let lap = truth.lap_length;
        let mut sim =
            Simulation::new(truth, SensorModel::default(), 5.0, 0.1, Matrix3::zeros(), 7);
        let mut driven = 0.0;
        let mut frames = 0;
        while sim.step().progress < lap {
            driven += 5.0 * 0.1;
            frames += 1;
            assert!(frames < 20000, "vehicle never completed a lap");
        }
        driven += 5.0 * 0.1;
        assert!(
            (driven - lap).abs() / lap < 0.03,
            "driven {driven:.1} vs lap {lap:.1}"
        );
    }
}
