//! Comparison baseline: a cubature Kalman filter over discrete landmarks
//! with Hungarian data association under Mahalanobis cost. Shares the motion
//! model with the spline backend; has no loop closure and no pruning.

mod hungarian;

pub use hungarian::{hungarian, FORBIDDEN};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::geom::{normalize_angle, AgentPose, BoundaryLabel, Point2};
use crate::motion;
use crate::slam::Detection;
use crate::uncertainty::{cubature_points, symmetrize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CkfConfig {
    /// Mahalanobis association gate (about the 99% ellipse at 3.0).
    pub gate: f64,
    pub initial_pose_std: [f64; 3],
}

impl Default for CkfConfig {
    fn default() -> Self {
        Self { gate: 3.0, initial_pose_std: [0.05, 0.05, 0.01] }
    }
}

/// Joint landmark map: pose plus one 2D landmark per discrete feature,
/// covariance over [pose(3) | landmark coordinates...].
#[derive(Debug, Clone)]
pub struct LandmarkMap {
    pub pose: AgentPose,
    landmarks: Vec<(BoundaryLabel, Point2)>,
    covariance: DMatrix<f64>,
}

impl LandmarkMap {
    pub fn new(pose: AgentPose, pose_std: [f64; 3]) -> Self {
        let mut cov = DMatrix::zeros(3, 3);
        for (i, s) in pose_std.iter().enumerate() {
            cov[(i, i)] = s * s;
        }
        Self { pose, landmarks: Vec::new(), covariance: cov }
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn landmarks(&self) -> &[(BoundaryLabel, Point2)] {
        &self.landmarks
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn marginal(&self, idx: usize) -> Matrix2<f64> {
        let b = 3 + 2 * idx;
        self.covariance.fixed_view::<2, 2>(b, b).into_owned()
    }

    fn state_mean(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = self.pose.x;
        v[1] = self.pose.y;
        v[2] = self.pose.heading;
        for (i, (_, p)) in self.landmarks.iter().enumerate() {
            v[3 + 2 * i] = p.x;
            v[3 + 2 * i + 1] = p.y;
        }
        v
    }

    fn apply_mean(&mut self, mean: &DVector<f64>) {
        self.pose = AgentPose::new(mean[0], mean[1], normalize_angle(mean[2]));
        for (i, (_, p)) in self.landmarks.iter_mut().enumerate() {
            p.x = mean[3 + 2 * i];
            p.y = mean[3 + 2 * i + 1];
        }
    }
}

/// Gated assignment: matched (landmark, detection) pairs plus detections
/// left unmatched (candidate new landmarks).
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
}

/// Same-label Mahalanobis costs between mapped landmarks (rows) and
/// world-frame detections (columns). Cross-label pairs get the forbidden
/// sentinel.
pub fn mahalanobis_cost(
    map: &LandmarkMap,
    detections: &[(BoundaryLabel, Point2, Matrix2<f64>)],
) -> Result<DMatrix<f64>, FilterError> {
    let mut costs = DMatrix::from_element(map.len(), detections.len(), FORBIDDEN);
    for (i, (label, lm)) in map.landmarks().iter().enumerate() {
        let lm_cov = map.marginal(i);
        for (j, (dl, pos, dcov)) in detections.iter().enumerate() {
            if dl != label {
                continue;
            }
            let s = lm_cov + dcov;
            let inv = s.try_inverse().ok_or_else(|| {
                FilterError::Numeric("singular innovation covariance in association".into())
            })?;
            let d = lm - pos;
            costs[(i, j)] = (d.transpose() * inv * d)[(0, 0)].sqrt();
        }
    }
    Ok(costs)
}

/// Minimum-cost matching with a gate: pairs above the gate are dropped and
/// their detections become unmatched.
pub fn associate(costs: &DMatrix<f64>, gate: f64) -> Assignment {
    let mut out = Assignment::default();
    let matched = hungarian(costs);
    let mut det_matched = vec![false; costs.ncols()];
    for (lm, det) in matched {
        if costs[(lm, det)] <= gate {
            out.pairs.push((lm, det));
            det_matched[det] = true;
        }
    }
    for (j, m) in det_matched.iter().enumerate() {
        if !m {
            out.unmatched_detections.push(j);
        }
    }
    out
}

/// The baseline filter.
#[derive(Debug, Clone)]
pub struct CkfFilter {
    pub config: CkfConfig,
    map: LandmarkMap,
}

impl CkfFilter {
    pub fn new(config: CkfConfig, initial_pose: AgentPose) -> Self {
        let map = LandmarkMap::new(initial_pose, config.initial_pose_std);
        Self { config, map }
    }

    pub fn map(&self) -> &LandmarkMap {
        &self.map
    }

    pub fn predict(&mut self, odometry: [f64; 3], odo_noise: &Matrix3<f64>) {
        let pose = self.map.pose;
        motion::predict_joint_covariance(&mut self.map.covariance, &pose, odometry, odo_noise);
        self.map.pose = pose.compose(odometry);
    }

    /// One perception cycle: predict, associate, batch cubature update with
    /// the matched detections, then append the unmatched ones as new
    /// landmarks.
    pub fn process_frame(
        &mut self,
        detections: &[Detection],
        odometry: [f64; 3],
        odo_noise: &Matrix3<f64>,
    ) -> Result<(), FilterError> {
        self.predict(odometry, odo_noise);
        if detections.is_empty() {
            return Ok(());
        }
        let rot = self.map.pose.rotation();
        let world: Vec<(BoundaryLabel, Point2, Matrix2<f64>)> = detections
            .iter()
            .map(|d| (d.label, self.map.pose.to_world(d.position), rot * d.covariance * rot.transpose()))
            .collect();
        let costs = mahalanobis_cost(&self.map, &world)?;
        let assignment = associate(&costs, self.config.gate);
        self.ckf_update(&assignment, detections)?;
        for &j in &assignment.unmatched_detections {
            self.append_landmark(&detections[j]);
        }
        Ok(())
    }

    /// Batch cubature update through the agent-frame measurement model
    /// h_i(x) = R(theta)^T (m_i - p).
    pub fn ckf_update(
        &mut self,
        assignment: &Assignment,
        detections: &[Detection],
    ) -> Result<(), FilterError> {
        if assignment.pairs.is_empty() {
            return Ok(());
        }
        let dim = self.map.dim();
        let m = assignment.pairs.len();
        let mean = self.map.state_mean();
        let belief = crate::uncertainty::GaussianBelief::new(mean.clone(), self.map.covariance.clone())
            .map_err(FilterError::from)?;
        let sigma = cubature_points(&belief).map_err(FilterError::from)?;

        let measure = |x: &DVector<f64>| -> DVector<f64> {
            let pose = AgentPose::new(x[0], x[1], x[2]);
            let rot_t = pose.rotation().transpose();
            let mut z = DVector::zeros(2 * m);
            for (k, &(lm_idx, _)) in assignment.pairs.iter().enumerate() {
                let lm = Point2::new(x[3 + 2 * lm_idx], x[3 + 2 * lm_idx + 1]);
                let local = rot_t * (lm - pose.position());
                z[2 * k] = local.x;
                z[2 * k + 1] = local.y;
            }
            z
        };

        let mapped: Vec<DVector<f64>> = sigma.points.iter().map(|p| measure(p)).collect();
        let mut z_pred = DVector::zeros(2 * m);
        for (zi, w) in mapped.iter().zip(&sigma.weights) {
            z_pred += zi * *w;
        }
        let mut p_zz = DMatrix::zeros(2 * m, 2 * m);
        let mut p_xz = DMatrix::zeros(dim, 2 * m);
        for ((xi, zi), w) in sigma.points.iter().zip(&mapped).zip(&sigma.weights) {
            let dz = zi - &z_pred;
            let dx = xi - &mean;
            p_zz.ger(*w, &dz, &dz, 1.0);
            p_xz.ger(*w, &dx, &dz, 1.0);
        }
        for (k, &(_, det_idx)) in assignment.pairs.iter().enumerate() {
            let c = &detections[det_idx].covariance;
            p_zz[(2 * k, 2 * k)] += c[(0, 0)];
            p_zz[(2 * k, 2 * k + 1)] += c[(0, 1)];
            p_zz[(2 * k + 1, 2 * k)] += c[(1, 0)];
            p_zz[(2 * k + 1, 2 * k + 1)] += c[(1, 1)];
        }

        let mut z = DVector::zeros(2 * m);
        for (k, &(_, det_idx)) in assignment.pairs.iter().enumerate() {
            z[2 * k] = detections[det_idx].position.x;
            z[2 * k + 1] = detections[det_idx].position.y;
        }

        let p_zz_inv = p_zz
            .clone()
            .try_inverse()
            .ok_or_else(|| FilterError::Numeric("innovation covariance not invertible".into()))?;
        let gain = &p_xz * p_zz_inv;
        let new_mean = &mean + &gain * (z - z_pred);
        self.map.apply_mean(&new_mean);
        let new_cov = &self.map.covariance - &gain * p_zz * gain.transpose();
        self.map.covariance = symmetrize(&new_cov);
        Ok(())
    }

    /// Initialize a new landmark from the pose mean with first-order pose
    /// covariance plus sensor covariance, keeping full cross terms.
    fn append_landmark(&mut self, det: &Detection) {
        let pose = self.map.pose;
        let world = pose.to_world(det.position);
        let rot = pose.rotation();
        let lever = world - pose.position();
        let j = Matrix2x3::new(1.0, 0.0, -lever.y, 0.0, 1.0, lever.x);
        let spp: Matrix3<f64> = self.map.covariance.fixed_view::<3, 3>(0, 0).into_owned();
        let marginal = j * spp * j.transpose() + rot * det.covariance * rot.transpose();
        let pose_rows = self.map.covariance.rows(0, 3).clone_owned();
        let cross = j * pose_rows;

        let old = self.map.dim();
        let mut cov = DMatrix::zeros(old + 2, old + 2);
        cov.view_mut((0, 0), (old, old)).copy_from(&self.map.covariance);
        cov.view_mut((old, old), (2, 2)).copy_from(&marginal);
        cov.view_mut((old, 0), (2, old)).copy_from(&cross);
        cov.view_mut((0, old), (old, 2)).copy_from(&cross.transpose());
        self.map.covariance = cov;
        self.map.landmarks.push((det.label, world));
    }
}

#[cfg(test)]
mod tests;
