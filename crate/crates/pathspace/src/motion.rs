//! Planar motion model shared by both backends: body-frame odometry
//! composition plus joint-covariance prediction for states laid out as
//! [pose(3) | map coordinates...].

use nalgebra::{DMatrix, Matrix3};

use crate::geom::AgentPose;

/// Jacobian of the composed pose with respect to the previous pose.
pub fn pose_jacobian(pose: &AgentPose, delta: [f64; 3]) -> Matrix3<f64> {
    let (s, c) = pose.heading.sin_cos();
    let (df, dl) = (delta[0], delta[1]);
    Matrix3::new(
        1.0, 0.0, -s * df - c * dl,
        0.0, 1.0, c * df - s * dl,
        0.0, 0.0, 1.0,
    )
}

/// Jacobian of the composed pose with respect to the body-frame odometry.
pub fn noise_jacobian(pose: &AgentPose) -> Matrix3<f64> {
    let (s, c) = pose.heading.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Propagate a joint covariance through the motion step: the pose block goes
/// through the motion Jacobian and is inflated by the odometry noise, the
/// pose-map cross terms are multiplied by the pose Jacobian, and map blocks
/// are untouched.
pub fn predict_joint_covariance(
    cov: &mut DMatrix<f64>,
    pose: &AgentPose,
    delta: [f64; 3],
    odo_noise: &Matrix3<f64>,
) {
    let n = cov.nrows();
    let f = pose_jacobian(pose, delta);
    let g = noise_jacobian(pose);
    let top = cov.rows(0, 3).clone_owned();
    let new_top = &f * &top; // [F*Spp | F*Spm]
    let pp = new_top.columns(0, 3) * f.transpose() + g * odo_noise * g.transpose();
    cov.view_mut((0, 0), (3, 3)).copy_from(&pp);
    if n > 3 {
        let pm = new_top.columns(3, n - 3).clone_owned();
        cov.view_mut((0, 3), (3, n - 3)).copy_from(&pm);
        cov.view_mut((3, 0), (n - 3, 3)).copy_from(&pm.transpose());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn zero_odometry_zero_noise_leaves_covariance_unchanged() {
        let pose = AgentPose::new(1.0, 2.0, 0.3);
        let mut cov = DMatrix::from_fn(7, 7, |i, j| ((i + 1) * (j + 1)) as f64 * 0.01);
        cov = (&cov + cov.transpose()) * 0.5;
        let before = cov.clone();
        predict_joint_covariance(&mut cov, &pose, [0.0, 0.0, 0.0], &Matrix3::zeros());
        assert!((cov - before).norm() < 1e-14);
    }

    #[test]
    fn pure_forward_motion_advances_x() {
        let pose = AgentPose::origin();
        let next = pose.compose([1.0, 0.0, 0.0]);
        assert!((next.x - 1.0).abs() < 1e-15);
        assert!(next.y.abs() < 1e-15);
    }

    #[test]
    fn positive_noise_increases_trace() {
        let pose = AgentPose::new(0.0, 0.0, 1.0);
        let mut cov = DMatrix::identity(9, 9) * 0.1;
        let before = cov.trace();
        let noise = Matrix3::new(0.01, 0.0, 0.0, 0.0, 0.02, 0.0, 0.0, 0.0, 0.005);
        predict_joint_covariance(&mut cov, &pose, [0.7, 0.1, 0.05], &noise);
        assert!(cov.trace() > before);
        assert!((cov.clone() - cov.transpose()).norm() < 1e-12);
    }
}
