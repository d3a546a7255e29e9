use super::*;
use crate::spline::BSpline;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn straightish_spline(n: usize) -> BSpline {
    let pts: Vec<Point2> = (0..n).map(|i| Point2::new(2.0 * i as f64, 0.0)).collect();
    BSpline::clamped_uniform(pts, 4).unwrap()
}

fn filter_with_spline(spline: BSpline, per_point_var: f64) -> PathSpaceFilter {
    let mut f = PathSpaceFilter::new(PathSpaceConfig::default(), AgentPose::origin());
    f.seed_spline(BoundaryLabel::Blue, spline, per_point_var.sqrt());
    f
}

fn min_eigen_ratio(cov: &DMatrix<f64>) -> f64 {
    let eig = cov.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    min / max.max(1e-300)
}

mod predict {
    use super::*;

    #[test]
    fn zero_odometry_zero_noise_is_identity() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        let before_pose = f.belief().pose();
        let before_cov = f.belief().covariance().clone();
        f.predict([0.0, 0.0, 0.0], &Matrix3::zeros());
        assert_eq!(f.belief().pose(), before_pose);
        assert!((f.belief().covariance() - before_cov).norm() < 1e-14);
    }

    #[test]
    fn forward_motion_moves_x() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        f.predict([1.0, 0.0, 0.0], &Matrix3::zeros());
        assert!((f.belief().pose().x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_never_decreases_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut f = filter_with_spline(straightish_spline(6), 0.01);
            let before = f.belief().covariance().trace();
            let odo = [
                rng.random_range(-0.5..1.0),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ];
            let noise = Matrix3::new(0.01, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.002);
            f.predict(odo, &noise);
            assert!(f.belief().covariance().trace() >= before - 1e-12);
        }
    }
}

mod classification {
    use super::*;

    fn params() -> ClassifierParams {
        ClassifierParams {
            growth_threshold: 2.0,
            separation_threshold: 2.0,
            endpoint_u_tolerance: 1e-3,
            ..Default::default()
        }
    }

    fn detect(x: f64, y: f64) -> Detection {
        Detection {
            position: Point2::new(x, y),
            label: BoundaryLabel::Blue,
            covariance: Matrix2::identity() * 0.01,
        }
    }

    #[test]
    fn interior_projection_is_an_update() {
        let f = filter_with_spline(straightish_spline(6), 0.01);
        let c = classify_detections(f.belief(), &[detect(4.0, 0.5)], &params());
        let sets = &c.per_label[&BoundaryLabel::Blue];
        assert_eq!(sets.updates.len(), 1);
        assert!(sets.expansion.is_empty());
        assert!(sets.projections[0] > 0.0 && sets.projections[0] < 1.0);
    }

    #[test]
    fn far_point_beyond_endpoint_is_expansion() {
        let f = filter_with_spline(straightish_spline(6), 0.01);
        // Endpoint is (10, 0); 5 m beyond along the tangent.
        let c = classify_detections(f.belief(), &[detect(15.0, 0.0)], &params());
        let sets = &c.per_label[&BoundaryLabel::Blue];
        assert_eq!(sets.expansion.len(), 1);
        assert!(sets.updates.is_empty());
    }

    #[test]
    fn near_point_beyond_endpoint_fails_growth_threshold() {
        let f = filter_with_spline(straightish_spline(6), 0.01);
        let c = classify_detections(f.belief(), &[detect(11.0, 0.0)], &params());
        let sets = &c.per_label[&BoundaryLabel::Blue];
        assert!(sets.expansion.is_empty());
        assert_eq!(sets.updates.len(), 1);
    }

    #[test]
    fn unknown_label_becomes_a_rejected_record() {
        let f = filter_with_spline(straightish_spline(6), 0.01);
        let d = Detection {
            position: Point2::new(1.0, 0.0),
            label: BoundaryLabel::Orange,
            covariance: Matrix2::identity() * 0.01,
        };
        let c = classify_detections(f.belief(), &[d], &params());
        assert_eq!(c.rejected.len(), 1);
    }

    #[test]
    fn closed_splines_never_expand() {
        let mut pts: Vec<Point2> = (0..12)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 12.0;
                Point2::new(10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        pts.push(pts[0]);
        let open = BSpline::clamped_uniform(pts, 4).unwrap();
        let closed = open.close_loop(&crate::spline::ClosureParams::default()).unwrap();
        let f = filter_with_spline(closed, 0.01);
        // Near the rim: fused as an update. Far outside: dropped, but never
        // an expansion.
        let c = classify_detections(f.belief(), &[detect(11.0, 0.0), detect(25.0, 0.0)], &params());
        let sets = &c.per_label[&BoundaryLabel::Blue];
        assert!(sets.expansion.is_empty());
        assert_eq!(sets.updates.len(), 1);
        assert_eq!(c.rejected.len(), 1);
    }
}

mod extension {
    use super::*;

    #[test]
    fn zero_pose_uncertainty_gives_exact_sensor_block() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        // Zero out the pose block.
        let mut cov = f.belief().covariance().clone();
        cov.view_mut((0, 0), (3, 3)).fill(0.0);
        f.belief_mut().set_covariance(cov);
        let sensor = Matrix2::new(0.04, 0.01, 0.01, 0.03);
        let before = f.belief().dim();
        f.extend_belief(BoundaryLabel::Blue, Point2::new(13.0, 0.3), sensor).unwrap();
        assert_eq!(f.belief().dim(), before + 2);
        let off = f.belief().block_offset(BoundaryLabel::Blue).unwrap();
        let n = f.belief().spline(BoundaryLabel::Blue).unwrap().n_control();
        let at = off + 2 * (n - 1);
        let block = f.belief().covariance().view((at, at), (2, 2)).clone_owned();
        assert!((block - sensor).norm() < 1e-12);
    }

    #[test]
    fn covariance_stays_symmetric_psd_after_growth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        for step in 0..10 {
            let noise = Matrix3::new(0.004, 0.0, 0.0, 0.0, 0.004, 0.0, 0.0, 0.0, 0.001);
            f.predict([1.0, 0.0, rng.random_range(-0.05..0.05)], &noise);
            let end = f.belief().spline(BoundaryLabel::Blue).unwrap().evaluate(1.0).unwrap();
            let target = end + Point2::new(2.5, rng.random_range(-0.5..0.5));
            f.extend_belief(BoundaryLabel::Blue, target, Matrix2::identity() * 0.01).unwrap();
            let cov = f.belief().covariance();
            assert!((cov - cov.transpose()).norm() < 1e-9);
            assert!(min_eigen_ratio(cov) > -1e-8, "step {step}: not PSD");
        }
    }

    #[test]
    fn extension_on_closed_spline_is_invalid_state() {
        let mut pts: Vec<Point2> = (0..12)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 12.0;
                Point2::new(8.0 * a.cos(), 8.0 * a.sin())
            })
            .collect();
        pts.push(pts[0]);
        let closed = BSpline::clamped_uniform(pts, 4)
            .unwrap()
            .close_loop(&crate::spline::ClosureParams::default())
            .unwrap();
        let mut f = filter_with_spline(closed, 0.01);
        let err = f
            .extend_belief(BoundaryLabel::Blue, Point2::new(20.0, 0.0), Matrix2::identity())
            .unwrap_err();
        assert!(matches!(err, FilterError::InvalidState(_)));
    }
}

mod measurement_fit {
    use super::*;

    fn world_updates(points: &[(f64, f64)], var: f64) -> Vec<(Point2, Matrix2<f64>)> {
        points.iter().map(|&(x, y)| (Point2::new(x, y), Matrix2::identity() * var)).collect()
    }

    #[test]
    fn huge_lambda_pins_the_prior() {
        let f = filter_with_spline(straightish_spline(8), 0.01);
        let updates = world_updates(&[(3.0, 0.8), (5.0, -0.6), (7.0, 0.4)], 0.01);
        let fit = f.fit_measurement_spline(BoundaryLabel::Blue, &updates, 1e9).unwrap();
        let spline = f.belief().spline(BoundaryLabel::Blue).unwrap();
        for i in 0..fit.measurement.len {
            let c = spline.control_points()[(fit.measurement.start + i) % spline.n_control()];
            assert!((fit.measurement.control_values[2 * i] - c.x).abs() < 1e-6);
            assert!((fit.measurement.control_values[2 * i + 1] - c.y).abs() < 1e-6);
        }
    }

    #[test]
    fn on_curve_readings_reproduce_the_prior_exactly() {
        let f = filter_with_spline(straightish_spline(8), 0.01);
        let spline = f.belief().spline(BoundaryLabel::Blue).unwrap();
        let updates: Vec<(Point2, Matrix2<f64>)> = [0.3, 0.45, 0.6]
            .iter()
            .map(|&u| (spline.evaluate(u).unwrap(), Matrix2::identity() * 0.01))
            .collect();
        let fit = f.fit_measurement_spline(BoundaryLabel::Blue, &updates, 1.0).unwrap();
        for i in 0..fit.measurement.len {
            let c = spline.control_points()[(fit.measurement.start + i) % spline.n_control()];
            assert!((fit.measurement.control_values[2 * i] - c.x).abs() < 1e-9);
            assert!((fit.measurement.control_values[2 * i + 1] - c.y).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_update_set_is_invalid() {
        let f = filter_with_spline(straightish_spline(8), 0.01);
        assert!(matches!(
            f.fit_measurement_spline(BoundaryLabel::Blue, &[], 1.0),
            Err(FilterError::InvalidArgument(_))
        ));
    }

    #[test]
    fn closed_form_matches_independent_dense_solve() {
        // Oracle: the same regularized objective solved as an augmented
        // least-squares problem [B; sqrt(L)] c = [y; sqrt(L) c_mu] via SVD.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..200 {
            let n_ctrl = rng.random_range(6..=12);
            let spline = crate::spline::tests::random_cubic(&mut rng, n_ctrl, n_ctrl);
            let f = filter_with_spline(spline.clone(), 0.02);
            let m = rng.random_range(1..=10usize);
            let lambda = rng.random_range(0.1..5.0);
            let updates: Vec<(Point2, Matrix2<f64>)> = (0..m)
                .map(|_| {
                    let u = rng.random_range(0.0..=1.0);
                    let p = spline.evaluate(u).unwrap()
                        + Point2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
                    (p, Matrix2::identity() * 0.01)
                })
                .collect();
            let fit =
                f.fit_measurement_spline(BoundaryLabel::Blue, &updates, lambda).unwrap();

            // Rebuild B and L from scratch.
            let meas = &fit.measurement;
            let mut basis = DMatrix::zeros(m, meas.len);
            for (row, (p, _)) in updates.iter().enumerate() {
                let proj = spline.project(*p);
                for (idx, w) in spline.support(proj.u).unwrap() {
                    let col = (idx + spline.n_control() - meas.start) % spline.n_control();
                    assert!(col < meas.len);
                    basis[(row, col)] += w;
                }
            }
            let mut reg = DVector::zeros(meas.len);
            for c in 0..meas.len {
                let mass: f64 = (0..m).map(|r| basis[(r, c)]).sum();
                reg[c] = lambda * (1.0 - mass / m as f64);
            }
            for axis in 0..2 {
                let mut aug = DMatrix::zeros(m + meas.len, meas.len);
                let mut rhs = DVector::zeros(m + meas.len);
                aug.view_mut((0, 0), (m, meas.len)).copy_from(&basis);
                for (r, (p, _)) in updates.iter().enumerate() {
                    rhs[r] = if axis == 0 { p.x } else { p.y };
                }
                for c in 0..meas.len {
                    aug[(m + c, c)] = reg[c].sqrt();
                    let prior = spline.control_points()[(meas.start + c) % spline.n_control()];
                    rhs[m + c] = reg[c].sqrt() * if axis == 0 { prior.x } else { prior.y };
                }
                let svd = aug.svd(true, true);
                let sol = svd.solve(&rhs, 1e-14).unwrap();
                for c in 0..meas.len {
                    let got = meas.control_values[2 * c + axis];
                    assert!(
                        (got - sol[c]).abs() < 1e-8,
                        "case {case} axis {axis} ctrl {c}: {got} vs {}",
                        sol[c]
                    );
                }
            }
        }
    }
}

mod kalman {
    use super::*;

    fn measurement_at_mean(f: &PathSpaceFilter, var: f64) -> SplineMeasurement {
        let spline = f.belief().spline(BoundaryLabel::Blue).unwrap();
        let len = 3.min(spline.n_control());
        let mut vals = DVector::zeros(2 * len);
        for i in 0..len {
            vals[2 * i] = spline.control_points()[i].x;
            vals[2 * i + 1] = spline.control_points()[i].y;
        }
        SplineMeasurement {
            control_values: vals,
            covariance: DMatrix::identity(2 * len, 2 * len) * var,
            start: 0,
            len,
            label: BoundaryLabel::Blue,
        }
    }

    #[test]
    fn mean_measurement_leaves_mean_and_shrinks_trace() {
        let mut f = filter_with_spline(straightish_spline(6), 0.05);
        let before_mean = f.belief().state_mean();
        let before_trace = f.belief().covariance().trace();
        let meas = measurement_at_mean(&f, 0.01);
        f.kalman_update(&meas).unwrap();
        assert!((f.belief().state_mean() - before_mean).norm() < 1e-12);
        assert!(f.belief().covariance().trace() <= before_trace + 1e-12);
    }

    #[test]
    fn infinite_measurement_noise_means_zero_gain() {
        let mut f = filter_with_spline(straightish_spline(6), 0.05);
        let before_mean = f.belief().state_mean();
        let before_cov = f.belief().covariance().clone();
        let mut meas = measurement_at_mean(&f, 1.0);
        // Push the measured values off the mean; the huge noise must mute them.
        for i in 0..meas.control_values.len() {
            meas.control_values[i] += 5.0;
        }
        meas.covariance *= 1e12;
        f.kalman_update(&meas).unwrap();
        assert!((f.belief().state_mean() - before_mean).norm() < 1e-6);
        assert!((f.belief().covariance() - before_cov).norm() < 1e-4);
    }

    #[test]
    fn diagonal_prior_single_point_matches_scalar_kalman() {
        // Oracle: with a diagonal joint covariance and a one-control-point
        // measurement, each coordinate follows the scalar Kalman update
        // K = P/(P+R), x' = x + K nu, P' = (1-K)^2 P + K^2 R.
        let mut f = filter_with_spline(straightish_spline(5), 0.04);
        let p0 = 0.04;
        let r = 0.01;
        let spline = f.belief().spline(BoundaryLabel::Blue).unwrap();
        let target = spline.control_points()[2] + Point2::new(0.3, -0.2);
        let meas = SplineMeasurement {
            control_values: DVector::from_vec(vec![target.x, target.y]),
            covariance: DMatrix::identity(2, 2) * r,
            start: 2,
            len: 1,
            label: BoundaryLabel::Blue,
        };
        let before = f.belief().state_mean();
        let off = f.belief().block_offset(BoundaryLabel::Blue).unwrap();
        f.kalman_update(&meas).unwrap();
        let after = f.belief().state_mean();
        let k = p0 / (p0 + r);
        let idx = off + 4;
        assert!((after[idx] - (before[idx] + k * 0.3)).abs() < 1e-12);
        assert!((after[idx + 1] - (before[idx + 1] - k * 0.2)).abs() < 1e-12);
        let p_new = f.belief().covariance()[(idx, idx)];
        let expect = (1.0 - k) * (1.0 - k) * p0 + k * k * r;
        assert!((p_new - expect).abs() < 1e-12);
    }

    #[test]
    fn update_never_grows_the_affected_marginal_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..30 {
            let mut f = filter_with_spline(straightish_spline(7), 0.03);
            let spline = f.belief().spline(BoundaryLabel::Blue).unwrap().clone();
            let updates: Vec<(Point2, Matrix2<f64>)> = (0..4)
                .map(|_| {
                    let u = rng.random_range(0.1..0.9);
                    (
                        spline.evaluate(u).unwrap()
                            + Point2::new(
                                rng.random_range(-0.3..0.3),
                                rng.random_range(-0.3..0.3),
                            ),
                        Matrix2::identity() * 0.02,
                    )
                })
                .collect();
            let fit = f.fit_measurement_spline(BoundaryLabel::Blue, &updates, 1.0).unwrap();
            let off = f.belief().block_offset(BoundaryLabel::Blue).unwrap();
            let n = f.belief().spline(BoundaryLabel::Blue).unwrap().n_control();
            let cols: Vec<usize> = (0..fit.measurement.len)
                .flat_map(|i| {
                    let c = (fit.measurement.start + i) % n;
                    [off + 2 * c, off + 2 * c + 1]
                })
                .collect();
            let before: f64 =
                cols.iter().map(|&c| f.belief().covariance()[(c, c)]).sum();
            f.kalman_update(&fit.measurement).unwrap();
            let after: f64 = cols.iter().map(|&c| f.belief().covariance()[(c, c)]).sum();
            assert!(after <= before + 1e-10, "marginal trace grew: {before} -> {after}");
        }
    }
}

mod simplification {
    use super::*;

    #[test]
    fn straight_line_reduces_with_tiny_deviation() {
        let pts: Vec<Point2> = (0..100).map(|i| Point2::new(i as f64, 0.0)).collect();
        let spline = BSpline::clamped_uniform(pts, 4).unwrap();
        let mut f = filter_with_spline(spline.clone(), 0.01);
        f.simplify(BoundaryLabel::Blue, 10, 0.2).unwrap();
        let new = f.belief().spline(BoundaryLabel::Blue).unwrap();
        assert_eq!(new.n_control(), 10);
        let mut worst: f64 = 0.0;
        for i in 0..=500 {
            let u = i as f64 / 500.0;
            let d = new.project(spline.evaluate(u).unwrap()).distance;
            worst = worst.max(d);
        }
        assert!(worst < 1e-3, "deviation {worst}");
    }

    #[test]
    fn same_budget_is_near_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let spline = crate::spline::tests::random_cubic(&mut rng, 12, 12);
        let mut f = filter_with_spline(spline.clone(), 0.01);
        f.simplify(BoundaryLabel::Blue, 12, 0.2).unwrap();
        let new = f.belief().spline(BoundaryLabel::Blue).unwrap();
        assert_eq!(new.n_control(), 12);
        let mut worst: f64 = 0.0;
        for i in 0..=300 {
            let u = i as f64 / 300.0;
            let d = new.project(spline.evaluate(u).unwrap()).distance;
            worst = worst.max(d);
        }
        assert!(worst < 1e-6, "deviation {worst}");
    }

    #[test]
    fn budget_below_minimum_is_rejected() {
        let mut f = filter_with_spline(straightish_spline(12), 0.01);
        assert!(matches!(
            f.simplify(BoundaryLabel::Blue, 4, 0.2),
            Err(FilterError::InvalidArgument(_))
        ));
    }

    #[test]
    fn covariance_dimension_tracks_the_budget() {
        let mut f = filter_with_spline(straightish_spline(30), 0.01);
        let before = f.belief().dim();
        assert_eq!(before, 3 + 60);
        f.simplify(BoundaryLabel::Blue, 8, 0.2).unwrap();
        assert_eq!(f.belief().dim(), 3 + 16);
        let cov = f.belief().covariance();
        assert!((cov - cov.transpose()).norm() < 1e-9);
        assert!(min_eigen_ratio(cov) > -1e-8);
    }
}

mod closure_check {
    use super::*;

    fn loop_filter(scale: f64) -> PathSpaceFilter {
        let mut pts: Vec<Point2> = (0..24)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 24.0;
                Point2::new(scale * a.cos(), scale * a.sin())
            })
            .collect();
        pts.push(pts[0] + Point2::new(0.0, -0.5));
        let spline = BSpline::clamped_uniform(pts, 4).unwrap();
        filter_with_spline(spline, 0.01)
    }

    #[test]
    fn short_spline_never_closes() {
        let mut f = loop_filter(5.0); // circumference ~31 m << 150 m
        f.set_projections_for_test(BoundaryLabel::Blue, vec![0.05]);
        assert!(!f.check_loop_closure(BoundaryLabel::Blue));
    }

    #[test]
    fn long_spline_without_early_association_stays_open() {
        let mut f = loop_filter(40.0); // circumference ~250 m
        f.set_projections_for_test(BoundaryLabel::Blue, vec![0.95, 0.99]);
        assert!(!f.check_loop_closure(BoundaryLabel::Blue));
    }

    #[test]
    fn long_spline_with_early_association_closes() {
        let mut f = loop_filter(40.0);
        f.set_projections_for_test(BoundaryLabel::Blue, vec![0.97, 0.05]);
        assert!(f.check_loop_closure(BoundaryLabel::Blue));
    }
}

mod frames {
    use super::*;

    fn noise() -> Matrix3<f64> {
        Matrix3::new(0.002, 0.0, 0.0, 0.0, 0.002, 0.0, 0.0, 0.0, 0.0005)
    }

    #[test]
    fn empty_frame_is_prediction_only() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        let dim = f.belief().dim();
        let report = f.process_frame(&[], [0.5, 0.0, 0.0], &noise()).unwrap();
        assert_eq!(f.belief().dim(), dim);
        assert!(report.updated.is_empty() && report.extended.is_empty());
        assert!((f.belief().pose().x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interior_detections_do_not_change_dimension() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        let dim = f.belief().dim();
        let dets = [Detection {
            position: Point2::new(4.0, 0.3),
            label: BoundaryLabel::Blue,
            covariance: Matrix2::identity() * 0.01,
        }];
        let report = f.process_frame(&dets, [0.0, 0.0, 0.0], &noise()).unwrap();
        assert_eq!(f.belief().dim(), dim);
        assert_eq!(report.updated, vec![BoundaryLabel::Blue]);
    }

    #[test]
    fn expansion_grows_dimension_by_two_at_most_once_per_label() {
        let mut f = filter_with_spline(straightish_spline(6), 0.01);
        let dim = f.belief().dim();
        // Two expansion candidates; only the chain's last point extends.
        let dets = [
            Detection {
                position: Point2::new(14.0, 0.0),
                label: BoundaryLabel::Blue,
                covariance: Matrix2::identity() * 0.01,
            },
            Detection {
                position: Point2::new(16.5, 0.0),
                label: BoundaryLabel::Blue,
                covariance: Matrix2::identity() * 0.01,
            },
        ];
        let report = f.process_frame(&dets, [0.0, 0.0, 0.0], &noise()).unwrap();
        assert_eq!(f.belief().dim(), dim + 2);
        assert_eq!(report.extended, vec![BoundaryLabel::Blue]);
        // The farthest chain point became the new endpoint; the nearer one
        // was re-categorized into the update set.
        let end = f.belief().spline(BoundaryLabel::Blue).unwrap().evaluate(1.0).unwrap();
        assert!((end - Point2::new(16.5, 0.0)).norm() < 1e-9);
        assert_eq!(report.updated, vec![BoundaryLabel::Blue]);
    }

    #[test]
    fn bootstrap_initializes_after_enough_distinct_landmarks() {
        let mut f = PathSpaceFilter::new(PathSpaceConfig::default(), AgentPose::origin());
        let mk = |x: f64, y: f64| Detection {
            position: Point2::new(x, y),
            label: BoundaryLabel::Blue,
            covariance: Matrix2::identity() * 0.01,
        };
        // Three then two more distinct cones ahead.
        let r1 = f
            .process_frame(&[mk(2.0, 1.5), mk(4.0, 1.6), mk(6.0, 1.4)], [0.0; 3], &noise())
            .unwrap();
        assert!(r1.bootstrapped.is_empty());
        assert!(f.belief().spline(BoundaryLabel::Blue).is_none());
        let r2 = f
            .process_frame(&[mk(8.0, 1.5), mk(10.0, 1.5)], [0.0; 3], &noise())
            .unwrap();
        assert_eq!(r2.bootstrapped, vec![BoundaryLabel::Blue]);
        let s = f.belief().spline(BoundaryLabel::Blue).unwrap();
        assert_eq!(s.n_control(), 5);
        assert_eq!(f.belief().dim(), 3 + 10);
        // The spline interpolates the chained cones.
        assert!(s.project(Point2::new(6.0, 1.4)).distance < 1e-6);
    }

    #[test]
    fn psd_and_dimension_invariants_hold_over_a_randomized_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut f = PathSpaceFilter::new(PathSpaceConfig::default(), AgentPose::origin());
        for frame in 0..200 {
            let x = f.belief().pose().x;
            let mut dets = Vec::new();
            for i in 0..rng.random_range(0..4) {
                dets.push(Detection {
                    position: Point2::new(
                        2.0 + 2.0 * i as f64 + rng.random_range(-0.2..0.2),
                        1.5 + rng.random_range(-0.2..0.2),
                    ),
                    label: BoundaryLabel::Blue,
                    covariance: Matrix2::identity() * 0.01,
                });
            }
            let _ = x;
            f.process_frame(&dets, [0.4, 0.0, 0.0], &noise()).unwrap();
            let expect = 3 + 2 * f.belief().map_size();
            assert_eq!(f.belief().dim(), expect);
            let cov = f.belief().covariance();
            assert!((cov - cov.transpose()).norm() < 1e-8);
            assert!(min_eigen_ratio(cov) > -1e-8, "frame {frame}: lost PSD");
        }
    }
}

