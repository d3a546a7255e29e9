use super::*;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn det(label: BoundaryLabel, x: f64, y: f64, var: f64) -> Detection {
    Detection { position: Point2::new(x, y), label, covariance: Matrix2::identity() * var }
}

fn noise() -> Matrix3<f64> {
    Matrix3::new(0.002, 0.0, 0.0, 0.0, 0.002, 0.0, 0.0, 0.0, 0.0005)
}

mod costs {
    use super::*;

    fn map_with_landmark(at: Point2, var: f64) -> CkfFilter {
        let mut f = CkfFilter::new(CkfConfig::default(), AgentPose::origin());
        // Zero pose uncertainty so the landmark marginal is exactly the
        // sensor covariance.
        f.map.covariance.view_mut((0, 0), (3, 3)).fill(0.0);
        f.append_landmark(&det(BoundaryLabel::Blue, at.x, at.y, var));
        f
    }

    #[test]
    fn coincident_pair_costs_zero() {
        let f = map_with_landmark(Point2::new(3.0, 1.0), 0.5);
        let dets = [(BoundaryLabel::Blue, Point2::new(3.0, 1.0), Matrix2::identity() * 0.5)];
        let c = mahalanobis_cost(f.map(), &dets).unwrap();
        assert!(c[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn identity_innovation_reduces_to_euclidean() {
        // d = (3,4), S = I => cost 5.
        let f = map_with_landmark(Point2::new(0.0, 0.0), 0.5);
        let dets = [(BoundaryLabel::Blue, Point2::new(3.0, 4.0), Matrix2::identity() * 0.5)];
        let c = mahalanobis_cost(f.map(), &dets).unwrap();
        assert!((c[(0, 0)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_innovation_rescales_the_cost() {
        // d = (3,4), S = 25 I => cost 1.
        let f = map_with_landmark(Point2::new(0.0, 0.0), 12.5);
        let dets = [(BoundaryLabel::Blue, Point2::new(3.0, 4.0), Matrix2::identity() * 12.5)];
        let c = mahalanobis_cost(f.map(), &dets).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_label_pairs_are_forbidden() {
        let f = map_with_landmark(Point2::new(0.0, 0.0), 0.5);
        let dets = [(BoundaryLabel::Yellow, Point2::new(0.0, 0.0), Matrix2::identity() * 0.5)];
        let c = mahalanobis_cost(f.map(), &dets).unwrap();
        assert_eq!(c[(0, 0)], FORBIDDEN);
    }
}

mod association {
    use super::*;

    #[test]
    fn above_gate_pairs_become_unmatched_detections() {
        let costs = DMatrix::from_row_slice(2, 2, &[0.5, 9.0, 9.0, 4.0]);
        let a = associate(&costs, 3.0);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.unmatched_detections, vec![1]);
    }

    #[test]
    fn all_above_gate_means_all_unmatched() {
        let costs = DMatrix::from_element(3, 2, 50.0);
        let a = associate(&costs, 3.0);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_detections, vec![0, 1]);
    }

    #[test]
    fn empty_map_leaves_every_detection_unmatched() {
        let costs = DMatrix::zeros(0, 3);
        let a = associate(&costs, 3.0);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_detections, vec![0, 1, 2]);
    }
}

mod updates {
    use super::*;

    #[test]
    fn no_detections_is_prediction_only() {
        let mut f = CkfFilter::new(CkfConfig::default(), AgentPose::origin());
        f.process_frame(&[], [1.0, 0.0, 0.0], &noise()).unwrap();
        assert!(f.map().is_empty());
        assert!((f.map().pose.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_detection_appends_a_landmark() {
        let mut f = CkfFilter::new(CkfConfig::default(), AgentPose::origin());
        f.process_frame(&[det(BoundaryLabel::Blue, 5.0, 1.0, 0.01)], [0.0; 3], &noise())
            .unwrap();
        assert_eq!(f.map().len(), 1);
        assert_eq!(f.map().dim(), 5);
        let (_, lm) = f.map().landmarks()[0];
        assert!((lm - Point2::new(5.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn matched_detection_at_prediction_keeps_mean_and_shrinks_covariance() {
        let mut f = CkfFilter::new(CkfConfig::default(), AgentPose::origin());
        f.process_frame(&[det(BoundaryLabel::Blue, 5.0, 1.0, 0.01)], [0.0; 3], &noise())
            .unwrap();
        let (_, lm_before) = f.map().landmarks()[0];
        let trace_before = f.map().marginal(0).trace();
        // Pin the pose so the measurement model is exactly linear; the
        // cubature-predicted measurement then equals h(mean).
        let mut cov = f.map().covariance().clone();
        cov.view_mut((0, 0), (3, 3)).fill(0.0);
        cov.view_mut((0, 3), (3, 2)).fill(0.0);
        cov.view_mut((3, 0), (2, 3)).fill(0.0);
        f.map.covariance = cov;
        // Re-observe exactly at the predicted agent-frame position.
        let local = f.map().pose.to_agent(lm_before);
        f.process_frame(
            &[det(BoundaryLabel::Blue, local.x, local.y, 0.01)],
            [0.0; 3],
            &Matrix3::zeros(),
        )
        .unwrap();
        assert_eq!(f.map().len(), 1, "re-observation must not spawn a ghost");
        let (_, lm_after) = f.map().landmarks()[0];
        assert!((lm_after - lm_before).norm() < 1e-9);
        assert!(f.map().marginal(0).trace() < trace_before);
    }

    #[test]
    fn zero_heading_certain_pose_matches_linear_kalman() {
        // With exactly known heading = 0 the measurement model is linear, so
        // the cubature update must equal the hand-computed Kalman update.
        let mut f = CkfFilter::new(
            CkfConfig { gate: 3.0, initial_pose_std: [0.0, 0.0, 0.0] },
            AgentPose::origin(),
        );
        let r = 0.01;
        f.append_landmark(&det(BoundaryLabel::Blue, 4.0, 2.0, 0.04));
        // Landmark marginal is 0.04 I (pose exactly known).
        let p0 = 0.04;
        let z = Point2::new(4.3, 1.8);
        let assignment = Assignment { pairs: vec![(0, 0)], unmatched_detections: vec![] };
        f.ckf_update(&assignment, &[det(BoundaryLabel::Blue, z.x, z.y, r)]).unwrap();
        let k = p0 / (p0 + r);
        let expect = Point2::new(4.0 + k * 0.3, 2.0 - k * 0.2);
        let (_, lm) = f.map().landmarks()[0];
        assert!((lm - expect).norm() < 1e-9, "{lm:?} vs {expect:?}");
        let p_new = f.map().marginal(0)[(0, 0)];
        assert!((p_new - (1.0 - k) * p0).abs() < 1e-9);
    }

    #[test]
    fn map_size_is_non_decreasing_and_covariance_stays_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = CkfFilter::new(CkfConfig::default(), AgentPose::origin());
        let truth: Vec<Point2> = (0..12)
            .map(|i| Point2::new(3.0 * i as f64, if i % 2 == 0 { 2.0 } else { -2.0 }))
            .collect();
        let mut last_len = 0;
        for _ in 0..60 {
            let pose = f.map().pose;
            let mut dets = Vec::new();
            for t in &truth {
                let local = pose.to_agent(*t);
                if local.x > 0.5 && local.norm() < 9.0 && rng.random_range(0.0..1.0) < 0.9 {
                    dets.push(det(
                        BoundaryLabel::Blue,
                        local.x + rng.random_range(-0.1..0.1),
                        local.y + rng.random_range(-0.1..0.1),
                        0.01,
                    ));
                }
            }
            f.process_frame(&dets, [0.5, 0.0, 0.0], &noise()).unwrap();
            assert!(f.map().len() >= last_len);
            last_len = f.map().len();
            let cov = f.map().covariance();
            assert!((cov - cov.transpose()).norm() < 1e-9);
            let eig = cov.clone().symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min > -1e-8 * max.max(1e-12), "lost PSD: {min} vs {max}");
        }
        assert!(f.map().len() >= truth.len().min(10));
    }
}
