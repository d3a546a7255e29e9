//! The spline SLAM backend: one joint Gaussian belief over the agent pose
//! and every boundary spline's control points, updated online from labeled
//! 2D detections.

mod classify;
mod measurement;
mod simplify;
mod update;

pub use classify::{
    classify_detections, order_expansion_chain, ClassifierParams, Classification, LabelSets,
};
pub use measurement::{MeasurementFit, SplineMeasurement};

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3};

use crate::error::FilterError;
use crate::geom::{normalize_angle, AgentPose, BoundaryLabel, Point2};
use crate::motion;
use crate::spline::{interpolate_clamped_cubic, BSpline, ClosureParams};

/// A labeled 2D landmark observation in the agent frame.
#[derive(Debug, Clone, Copy)]
pub struct Detection {
    pub position: Point2,
    pub label: BoundaryLabel,
    pub covariance: Matrix2<f64>,
}

/// Backend parameters. Defaults follow the track characteristics the
/// simulator models; everything is overridable through the experiment
/// config.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PathSpaceConfig {
    /// Boundary labels the filter maintains splines for.
    pub labels: Vec<BoundaryLabel>,
    pub classifier: ClassifierParams,
    /// Regularization scale of the measurement-spline fit.
    pub lambda: f64,
    /// Diagonal floor added to the fitted measurement covariance; the raw
    /// cubature covariance has rank at most twice the reading count.
    pub fit_noise_floor: f64,
    /// Uniform mixing weight of the simplification knot distribution.
    pub baseline_weight: f64,
    /// Fraction of the domain counted as the "early segment" for loop
    /// closure detection.
    pub early_segment_fraction: f64,
    /// Minimum spline arc length before loop closure may trigger.
    pub min_path_length: f64,
    /// Maximum endpoint gap bridged when closing the loop.
    pub closure_max_gap: f64,
    /// Maximum geometric deviation tolerated when closing the loop.
    pub closure_max_deviation: f64,
    /// Control-point budget per boundary applied at loop closure.
    pub budget: usize,
    /// While the spline is open, periodic simplification triggers once the
    /// control count exceeds `budget * open_budget_factor` and reduces to
    /// that same cap, leaving room to grow between passes.
    pub open_budget_factor: f64,
    /// Periodic simplification cadence in frames (while open).
    pub simplify_every: u64,
    /// Simplification sampling density.
    pub samples_per_control: usize,
    /// Curvature values above this are clipped before knot placement, so
    /// noise kinks cannot soak up the whole budget.
    pub curvature_saturation: f64,
    /// Cluster radius for pre-spline bootstrap buffering.
    pub bootstrap_merge_radius: f64,
    /// Initial pose position/heading standard deviations.
    pub initial_pose_std: [f64; 3],
}

impl Default for PathSpaceConfig {
    fn default() -> Self {
        Self {
            labels: vec![BoundaryLabel::Blue, BoundaryLabel::Yellow],
            classifier: ClassifierParams::default(),
            lambda: 1.0,
            fit_noise_floor: 0.01,
            baseline_weight: 0.2,
            early_segment_fraction: 0.1,
            min_path_length: 150.0,
            closure_max_gap: 16.0,
            closure_max_deviation: 5.0,
            budget: 38,
            open_budget_factor: 1.7,
            simplify_every: 100,
            samples_per_control: 20,
            curvature_saturation: 0.5,
            bootstrap_merge_radius: 1.0,
            initial_pose_std: [0.05, 0.05, 0.01],
        }
    }
}

/// Joint Gaussian belief: pose mean, boundary splines (their control points
/// are the map mean) and one covariance over
/// [pose(3) | spline block | spline block | ...].
#[derive(Debug, Clone)]
pub struct JointBelief {
    pose: AgentPose,
    splines: Vec<(BoundaryLabel, BSpline)>,
    covariance: DMatrix<f64>,
}

impl JointBelief {
    pub fn new(pose: AgentPose, pose_std: [f64; 3]) -> Self {
        let mut cov = DMatrix::zeros(3, 3);
        for (i, s) in pose_std.iter().enumerate() {
            cov[(i, i)] = s * s;
        }
        Self { pose, splines: Vec::new(), covariance: cov }
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn splines(&self) -> impl Iterator<Item = (BoundaryLabel, &BSpline)> {
        self.splines.iter().map(|(l, s)| (*l, s))
    }

    pub fn spline(&self, label: BoundaryLabel) -> Option<&BSpline> {
        self.splines.iter().find(|(l, _)| *l == label).map(|(_, s)| s)
    }

    /// Total control points across all splines.
    pub fn map_size(&self) -> usize {
        self.splines.iter().map(|(_, s)| s.n_control()).sum()
    }

    /// State index of the first control coordinate of the label's block.
    pub fn block_offset(&self, label: BoundaryLabel) -> Option<usize> {
        let mut off = 3;
        for (l, s) in &self.splines {
            if *l == label {
                return Some(off);
            }
            off += 2 * s.n_control();
        }
        None
    }

    /// State index of a control coordinate, wrapping the control index for
    /// closed splines.
    pub(crate) fn coord_index(&self, label: BoundaryLabel, ctrl: usize, axis: usize) -> usize {
        let off = self.block_offset(label).expect("label present");
        let n = self.spline(label).expect("label present").n_control();
        off + 2 * (ctrl % n) + axis
    }

    /// Flattened state mean [pose | control coordinates...].
    pub fn state_mean(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = self.pose.x;
        v[1] = self.pose.y;
        v[2] = self.pose.heading;
        let mut off = 3;
        for (_, s) in &self.splines {
            for p in s.control_points() {
                v[off] = p.x;
                v[off + 1] = p.y;
                off += 2;
            }
        }
        v
    }

    pub(crate) fn apply_delta(&mut self, delta: &DVector<f64>) {
        debug_assert_eq!(delta.len(), self.dim());
        self.pose = AgentPose::new(
            self.pose.x + delta[0],
            self.pose.y + delta[1],
            normalize_angle(self.pose.heading + delta[2]),
        );
        let mut off = 3;
        for (_, s) in self.splines.iter_mut() {
            for p in s.control_points_mut() {
                p.x += delta[off];
                p.y += delta[off + 1];
                off += 2;
            }
        }
    }

    /// Register a new spline whose block is appended at the end of the
    /// state. `block` is its 2n x 2n covariance, `cross` the 2n x old-dim
    /// cross term against the existing state.
    pub(crate) fn insert_spline(
        &mut self,
        label: BoundaryLabel,
        spline: BSpline,
        block: DMatrix<f64>,
        cross: DMatrix<f64>,
    ) {
        let old = self.dim();
        let add = 2 * spline.n_control();
        debug_assert_eq!(block.nrows(), add);
        debug_assert_eq!(cross.nrows(), add);
        debug_assert_eq!(cross.ncols(), old);
        let mut cov = DMatrix::zeros(old + add, old + add);
        cov.view_mut((0, 0), (old, old)).copy_from(&self.covariance);
        cov.view_mut((old, old), (add, add)).copy_from(&block);
        cov.view_mut((old, 0), (add, old)).copy_from(&cross);
        cov.view_mut((0, old), (old, add)).copy_from(&cross.transpose());
        self.covariance = cov;
        self.splines.push((label, spline));
    }

    /// Grow a spline's block by one control point at its end. `marginal` is
    /// the new 2x2 block; `cross` its 2 x old-dim cross term against the
    /// whole pre-insertion state.
    pub(crate) fn push_control(
        &mut self,
        label: BoundaryLabel,
        spline: BSpline,
        marginal: Matrix2<f64>,
        cross: DMatrix<f64>,
    ) {
        let offset = self.block_offset(label).expect("label present");
        let old_n = self.spline(label).expect("label present").n_control();
        debug_assert_eq!(spline.n_control(), old_n + 1);
        let at = offset + 2 * old_n; // insertion position
        let old = self.dim();
        debug_assert_eq!(cross.ncols(), old);
        let mut cov = DMatrix::zeros(old + 2, old + 2);
        // Quadrants around the inserted rows/columns.
        cov.view_mut((0, 0), (at, at)).copy_from(&self.covariance.view((0, 0), (at, at)));
        cov.view_mut((0, at + 2), (at, old - at))
            .copy_from(&self.covariance.view((0, at), (at, old - at)));
        cov.view_mut((at + 2, 0), (old - at, at))
            .copy_from(&self.covariance.view((at, 0), (old - at, at)));
        cov.view_mut((at + 2, at + 2), (old - at, old - at))
            .copy_from(&self.covariance.view((at, at), (old - at, old - at)));
        cov.view_mut((at, at), (2, 2)).copy_from(&marginal);
        cov.view_mut((at, 0), (2, at)).copy_from(&cross.columns(0, at));
        cov.view_mut((0, at), (at, 2)).copy_from(&cross.columns(0, at).transpose());
        if old > at {
            cov.view_mut((at, at + 2), (2, old - at)).copy_from(&cross.columns(at, old - at));
            cov.view_mut((at + 2, at), (old - at, 2))
                .copy_from(&cross.columns(at, old - at).transpose());
        }
        self.covariance = cov;
        for (l, s) in self.splines.iter_mut() {
            if *l == label {
                *s = spline;
                break;
            }
        }
    }

    /// Swap in a refitted spline for `label` together with its new block
    /// covariance; cross terms are mapped through the linear fit operator
    /// (2*new x 2*old).
    pub(crate) fn replace_block(
        &mut self,
        label: BoundaryLabel,
        spline: BSpline,
        new_block: DMatrix<f64>,
        transform: &DMatrix<f64>,
    ) {
        let offset = self.block_offset(label).expect("label present");
        let old_w = 2 * self.spline(label).expect("label present").n_control();
        let new_w = 2 * spline.n_control();
        debug_assert_eq!(transform.ncols(), old_w);
        debug_assert_eq!(transform.nrows(), new_w);
        let old = self.dim();
        let rest = old - offset - old_w;
        let new_dim = old - old_w + new_w;
        let mut cov = DMatrix::zeros(new_dim, new_dim);

        // Untouched corners.
        cov.view_mut((0, 0), (offset, offset))
            .copy_from(&self.covariance.view((0, 0), (offset, offset)));
        cov.view_mut((0, offset + new_w), (offset, rest))
            .copy_from(&self.covariance.view((0, offset + old_w), (offset, rest)));
        cov.view_mut((offset + new_w, 0), (rest, offset))
            .copy_from(&self.covariance.view((offset + old_w, 0), (rest, offset)));
        cov.view_mut((offset + new_w, offset + new_w), (rest, rest)).copy_from(
            &self.covariance.view((offset + old_w, offset + old_w), (rest, rest)),
        );

        // Cross terms through the fit operator.
        if offset > 0 {
            let left = self.covariance.view((offset, 0), (old_w, offset)).clone_owned();
            let mapped = transform * left;
            cov.view_mut((offset, 0), (new_w, offset)).copy_from(&mapped);
            cov.view_mut((0, offset), (offset, new_w)).copy_from(&mapped.transpose());
        }
        if rest > 0 {
            let right =
                self.covariance.view((offset, offset + old_w), (old_w, rest)).clone_owned();
            let mapped = transform * right;
            cov.view_mut((offset, offset + new_w), (new_w, rest)).copy_from(&mapped);
            cov.view_mut((offset + new_w, offset), (rest, new_w))
                .copy_from(&mapped.transpose());
        }

        cov.view_mut((offset, offset), (new_w, new_w)).copy_from(&new_block);
        self.covariance = crate::uncertainty::symmetrize(&cov);
        for (l, s) in self.splines.iter_mut() {
            if *l == label {
                *s = spline;
                break;
            }
        }
    }

    /// Drop the duplicate endpoint control point when a spline closes.
    pub(crate) fn set_closed(&mut self, label: BoundaryLabel, closed: BSpline) {
        let offset = self.block_offset(label).expect("label present");
        let old_n = self.spline(label).expect("label present").n_control();
        debug_assert_eq!(closed.n_control(), old_n - 1);
        let at = offset + 2 * (old_n - 1);
        let old = self.dim();
        let rest = old - at - 2;
        let mut cov = DMatrix::zeros(old - 2, old - 2);
        cov.view_mut((0, 0), (at, at)).copy_from(&self.covariance.view((0, 0), (at, at)));
        if rest > 0 {
            cov.view_mut((0, at), (at, rest))
                .copy_from(&self.covariance.view((0, at + 2), (at, rest)));
            cov.view_mut((at, 0), (rest, at))
                .copy_from(&self.covariance.view((at + 2, 0), (rest, at)));
            cov.view_mut((at, at), (rest, rest))
                .copy_from(&self.covariance.view((at + 2, at + 2), (rest, rest)));
        }
        self.covariance = cov;
        for (l, s) in self.splines.iter_mut() {
            if *l == label {
                *s = closed;
                break;
            }
        }
    }

    pub(crate) fn set_covariance(&mut self, cov: DMatrix<f64>) {
        debug_assert_eq!(cov.nrows(), self.dim());
        self.covariance = cov;
    }
}

/// What happened during one perception cycle.
#[derive(Debug, Clone, Default)]
pub struct FrameReport {
    pub frame: u64,
    pub rejected: Vec<Detection>,
    pub extended: Vec<BoundaryLabel>,
    pub updated: Vec<BoundaryLabel>,
    pub closed: Vec<BoundaryLabel>,
    pub simplified: Vec<BoundaryLabel>,
    pub bootstrapped: Vec<BoundaryLabel>,
}

#[derive(Debug, Clone, Default)]
struct BootstrapBuffer {
    clusters: Vec<(Point2, Matrix2<f64>, usize)>,
    anchor: Option<Point2>,
}

/// Online filter state: the joint belief plus bookkeeping that spans frames
/// (bootstrap buffers, frame counter, latest update projections per label).
#[derive(Debug, Clone)]
pub struct PathSpaceFilter {
    pub config: PathSpaceConfig,
    belief: JointBelief,
    frame: u64,
    buffers: BTreeMap<BoundaryLabel, BootstrapBuffer>,
    last_projections: BTreeMap<BoundaryLabel, Vec<f64>>,
}

impl PathSpaceFilter {
    pub fn new(config: PathSpaceConfig, initial_pose: AgentPose) -> Self {
        let belief = JointBelief::new(initial_pose, config.initial_pose_std);
        Self {
            config,
            belief,
            frame: 0,
            buffers: BTreeMap::new(),
            last_projections: BTreeMap::new(),
        }
    }

    pub fn belief(&self) -> &JointBelief {
        &self.belief
    }

    pub(crate) fn belief_mut(&mut self) -> &mut JointBelief {
        &mut self.belief
    }

    /// Register a pre-built spline with an isotropic per-control-point
    /// standard deviation and no initial cross terms. Used to seed synthetic
    /// beliefs for benchmarks and tests.
    pub fn seed_spline(&mut self, label: BoundaryLabel, spline: BSpline, per_point_std: f64) {
        let n = spline.n_control();
        let block = DMatrix::identity(2 * n, 2 * n) * per_point_std * per_point_std;
        let cross = DMatrix::zeros(2 * n, self.belief.dim());
        self.belief.insert_spline(label, spline, block, cross);
    }

    #[cfg(test)]
    pub(crate) fn set_projections_for_test(&mut self, label: BoundaryLabel, us: Vec<f64>) {
        self.last_projections.insert(label, us);
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn all_closed(&self) -> bool {
        let mut any = false;
        for (_, s) in self.belief.splines() {
            any = true;
            if !s.is_closed() {
                return false;
            }
        }
        any
    }

    /// Motion prediction: compose the pose with body-frame odometry and
    /// propagate the joint covariance.
    pub fn predict(&mut self, odometry: [f64; 3], odo_noise: &Matrix3<f64>) {
        let pose = self.belief.pose;
        motion::predict_joint_covariance(&mut self.belief.covariance, &pose, odometry, odo_noise);
        self.belief.pose = pose.compose(odometry);
    }

    /// One full perception cycle: predict, classify, extend, fit, update,
    /// close/simplify. Exactly one Kalman update runs per label per frame.
    pub fn process_frame(
        &mut self,
        detections: &[Detection],
        odometry: [f64; 3],
        odo_noise: &Matrix3<f64>,
    ) -> Result<FrameReport, FilterError> {
        self.frame += 1;
        let frame = self.frame;
        self.step(detections, odometry, odo_noise, frame).map_err(|e| e.at_frame(frame))
    }

    fn step(
        &mut self,
        detections: &[Detection],
        odometry: [f64; 3],
        odo_noise: &Matrix3<f64>,
        frame: u64,
    ) -> Result<FrameReport, FilterError> {
        let mut report = FrameReport { frame, ..Default::default() };
        self.predict(odometry, odo_noise);

        // Split detections into tracked labels, labels awaiting bootstrap,
        // and rejects.
        let mut tracked: Vec<Detection> = Vec::new();
        let mut pending: BTreeMap<BoundaryLabel, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            if !self.config.labels.contains(&d.label) {
                report.rejected.push(*d);
            } else if self.belief.spline(d.label).is_some() {
                tracked.push(*d);
            } else {
                pending.entry(d.label).or_default().push(*d);
            }
        }

        for (label, dets) in pending {
            if self.bootstrap(label, &dets)? {
                report.bootstrapped.push(label);
            }
        }

        let classification =
            classify::classify_detections(&self.belief, &tracked, &self.config.classifier);
        report.rejected.extend(classification.rejected.iter().copied());

        let labels: Vec<BoundaryLabel> = classification.per_label.keys().copied().collect();
        for label in labels {
            let sets = &classification.per_label[&label];
            let mut updates = sets.updates.clone();

            if !sets.expansion.is_empty() {
                let spline = self.belief.spline(label).expect("classified label");
                if !spline.is_closed() {
                    let endpoint = spline.evaluate(1.0).map_err(FilterError::from)?;
                    let chain = order_expansion_chain(&sets.expansion, endpoint);
                    let (extension, rest) = chain.split_last().expect("non-empty chain");
                    self.extend_belief(label, extension.0, extension.1)?;
                    report.extended.push(label);
                    updates.extend(rest.iter().copied());
                } else {
                    updates.extend(sets.expansion.iter().copied());
                }
            }

            if !updates.is_empty() {
                let fit = self.fit_measurement_spline(label, &updates, self.config.lambda)?;
                self.kalman_update(&fit.measurement)?;
                self.last_projections.insert(label, fit.projections);
                report.updated.push(label);
            }
        }

        // Loop closure, then one simplification cycle on the closed spline.
        let open_labels: Vec<BoundaryLabel> = self
            .belief
            .splines()
            .filter(|(_, s)| !s.is_closed())
            .map(|(l, _)| l)
            .collect();
        for label in open_labels {
            if self.check_loop_closure(label) {
                match self.close_belief(label) {
                    Ok(()) => {
                        report.closed.push(label);
                        self.simplify(label, self.config.budget, self.config.baseline_weight)?;
                        report.simplified.push(label);
                    }
                    Err(FilterError::Spline(crate::SplineError::ClosureRejected(_))) => {
                        // Gap still too wide; retry on a later frame.
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        // Periodic simplification while open, once growth exceeds the slack
        // above the budget.
        if self.config.simplify_every > 0 && frame % self.config.simplify_every == 0 {
            let open_cap = (self.config.budget as f64 * self.config.open_budget_factor)
                .ceil() as usize;
            let candidates: Vec<BoundaryLabel> = self
                .belief
                .splines()
                .filter(|(_, s)| !s.is_closed() && s.n_control() > open_cap)
                .map(|(l, _)| l)
                .collect();
            for label in candidates {
                self.simplify(label, open_cap, self.config.baseline_weight)?;
                report.simplified.push(label);
            }
        }

        Ok(report)
    }

    /// Arc length plus early-segment association, per the closure rule.
    pub fn check_loop_closure(&self, label: BoundaryLabel) -> bool {
        let Some(spline) = self.belief.spline(label) else { return false };
        if spline.is_closed() {
            return false;
        }
        if spline.arc_length() <= self.config.min_path_length {
            return false;
        }
        self.last_projections
            .get(&label)
            .map(|us| us.iter().any(|&u| u < self.config.early_segment_fraction))
            .unwrap_or(false)
    }

    fn close_belief(&mut self, label: BoundaryLabel) -> Result<(), FilterError> {
        let spline = self
            .belief
            .spline(label)
            .ok_or_else(|| FilterError::InvalidState(format!("no spline for {label}")))?;
        let params = ClosureParams {
            max_endpoint_gap: self.config.closure_max_gap,
            max_shape_deviation: self.config.closure_max_deviation,
        };
        let closed = spline.close_loop(&params).map_err(FilterError::from)?;
        self.belief.set_closed(label, closed);
        Ok(())
    }

    /// Append a control point for a world-frame extension point: terminal
    /// multiplicity reduction plus re-clamping around the new point, which
    /// keeps existing control points (and their covariance) untouched. The
    /// new marginal is the sensor covariance inflated by the first-order
    /// pose covariance at the landmark.
    pub fn extend_belief(
        &mut self,
        label: BoundaryLabel,
        point: Point2,
        sensor_cov_world: Matrix2<f64>,
    ) -> Result<(), FilterError> {
        let spline = self
            .belief
            .spline(label)
            .ok_or_else(|| FilterError::InvalidState(format!("no spline for {label}")))?;
        if spline.is_closed() {
            return Err(FilterError::InvalidState("cannot extend a closed spline".into()));
        }
        let ext = spline.append_control_point(point).map_err(FilterError::from)?;
        if ext.new_index.is_none() {
            return Ok(());
        }
        let (marginal, cross) = self.landmark_init(point, &sensor_cov_world);
        self.belief.push_control(label, ext.spline, marginal, cross);
        Ok(())
    }

    /// First-order new-landmark covariance, J = [I | Rot90 (z - p)] being
    /// the pose-to-landmark Jacobian: the marginal is J Spp J^T + sensor and
    /// the cross term against the whole state is J * Sigma[pose rows], which
    /// keeps the augmented joint matrix positive semi-definite.
    fn landmark_init(
        &self,
        world: Point2,
        sensor_cov_world: &Matrix2<f64>,
    ) -> (Matrix2<f64>, DMatrix<f64>) {
        let pose = self.belief.pose;
        let lever = world - pose.position();
        let j = Matrix2x3::new(1.0, 0.0, -lever.y, 0.0, 1.0, lever.x);
        let spp: Matrix3<f64> = self.belief.covariance.fixed_view::<3, 3>(0, 0).into_owned();
        let marginal = j * spp * j.transpose() + sensor_cov_world;
        let pose_rows = self.belief.covariance.rows(0, 3).clone_owned();
        let mut cross = DMatrix::zeros(2, self.belief.dim());
        cross.copy_from(&(j * pose_rows));
        (marginal, cross)
    }

    /// Buffer detections into clusters until enough distinct landmarks exist
    /// to interpolate an initial clamped cubic.
    fn bootstrap(
        &mut self,
        label: BoundaryLabel,
        detections: &[Detection],
    ) -> Result<bool, FilterError> {
        let pose = self.belief.pose;
        let merge = self.config.bootstrap_merge_radius;
        let order = 4usize;
        let buf = self.buffers.entry(label).or_default();
        if buf.anchor.is_none() {
            buf.anchor = Some(pose.position());
        }
        for d in detections {
            let world = pose.to_world(d.position);
            let cov_world = pose.rotation() * d.covariance * pose.rotation().transpose();
            match buf
                .clusters
                .iter_mut()
                .find(|(mean, _, _)| (mean - world).norm() < merge)
            {
                Some((mean, cov, count)) => {
                    *count += 1;
                    *mean += (world - *mean) / *count as f64;
                    *cov = cov_world;
                }
                None => buf.clusters.push((world, cov_world, 1)),
            }
        }
        if buf.clusters.len() < order + 1 {
            return Ok(false);
        }

        let anchor = buf.anchor.expect("anchor set");
        let points: Vec<(Point2, Matrix2<f64>)> =
            buf.clusters.iter().map(|(m, c, _)| (*m, *c)).collect();
        let chained = order_expansion_chain(&points, anchor);
        let seed: Vec<(Point2, Matrix2<f64>)> = chained.into_iter().take(order + 1).collect();
        let spline = interpolate_clamped_cubic(
            &seed.iter().map(|(p, _)| *p).collect::<Vec<_>>(),
        )
        .map_err(FilterError::from)?;

        // Joint augmentation: every seeded point shares the pose uncertainty,
        // so their mutual cross terms are J_i Spp J_j^T and only the sensor
        // noise sits on the diagonal.
        let n = spline.n_control();
        let old_dim = self.belief.dim();
        let spp: Matrix3<f64> = self.belief.covariance.fixed_view::<3, 3>(0, 0).into_owned();
        let pose_rows = self.belief.covariance.rows(0, 3).clone_owned();
        let jacobians: Vec<Matrix2x3<f64>> = seed
            .iter()
            .map(|(p, _)| {
                let lever = p - pose.position();
                Matrix2x3::new(1.0, 0.0, -lever.y, 0.0, 1.0, lever.x)
            })
            .collect();
        let mut block = DMatrix::zeros(2 * n, 2 * n);
        let mut cross = DMatrix::zeros(2 * n, old_dim);
        for i in 0..n {
            for jdx in 0..n {
                let mut pair = jacobians[i] * spp * jacobians[jdx].transpose();
                if i == jdx {
                    pair += seed[i].1;
                }
                block.view_mut((2 * i, 2 * jdx), (2, 2)).copy_from(&pair);
            }
            cross.view_mut((2 * i, 0), (2, old_dim)).copy_from(&(jacobians[i] * &pose_rows));
        }
        self.belief.insert_spline(label, spline, block, cross);
        self.buffers.remove(&label);
        Ok(true)
    }
}
