//! Curvature-weighted simplification: re-allocate a fixed control-point
//! budget along the curve by curvature mass (with a uniform baseline), refit
//! by least squares, and carry the belief through the linear fit operator.

use nalgebra::DMatrix;

use super::PathSpaceFilter;
use crate::error::FilterError;
use crate::geom::{BoundaryLabel, Point2};
use crate::spline::{
    periodic_knot_vector, sample_basis_matrix, solve_operator, BSpline, KnotVector,
};
use crate::uncertainty::{cubature_propagate, interleave2, GaussianBelief};

impl PathSpaceFilter {
    /// Refit the label's spline onto `budget` control points. Knots are
    /// placed at equal quantiles of the curvature profile mixed with a
    /// uniform baseline; the uncertainty of the original control points is
    /// propagated by cubature (knots and parameters held fixed from the mean
    /// pass) and the cross-covariances through the same linear fit operator.
    pub fn simplify(
        &mut self,
        label: BoundaryLabel,
        budget: usize,
        baseline_weight: f64,
    ) -> Result<(), FilterError> {
        let spc = self.config.samples_per_control.max(4);
        let spline = self
            .belief
            .spline(label)
            .ok_or_else(|| FilterError::InvalidState(format!("no spline for {label}")))?
            .clone();
        let order = spline.order();
        if budget < order + 1 {
            return Err(FilterError::InvalidArgument(format!(
                "budget {budget} below minimum {}",
                order + 1
            )));
        }
        if !(0.0..=1.0).contains(&baseline_weight) {
            return Err(FilterError::InvalidArgument("baseline_weight outside [0,1]".into()));
        }

        let n = spline.n_control();
        let closed = spline.is_closed();
        let m_s = spc * n;
        let params: Vec<f64> = if closed {
            (0..m_s).map(|i| i as f64 / m_s as f64).collect()
        } else {
            (0..m_s).map(|i| i as f64 / (m_s - 1) as f64).collect()
        };

        let samples: Vec<Point2> = params
            .iter()
            .map(|&u| spline.evaluate(u))
            .collect::<Result<_, _>>()
            .map_err(FilterError::from)?;

        // Linear operator from the samples to the new control points, and
        // the skeleton carrying the new knot vector.
        let (skeleton, fit_op) = if budget == n {
            // Same budget: keep the knot vector; the refit is the identity
            // up to the ridge term.
            let basis = sample_basis_matrix(&spline, &params).map_err(FilterError::from)?;
            let op = solve_operator(&basis, 1e-9).map_err(FilterError::from)?;
            (spline.clone(), op)
        } else {
            let skeleton =
                self.reallocate_knots(&spline, &params, &samples, budget, baseline_weight)?;
            // Refit against a uniform-speed parameterization of the samples:
            // cumulative chord length, endpoints pinned for open splines.
            let mut s_params = vec![0.0; m_s];
            for i in 1..m_s {
                s_params[i] = s_params[i - 1] + (samples[i] - samples[i - 1]).norm();
            }
            let total = if closed {
                s_params[m_s - 1] + (samples[0] - samples[m_s - 1]).norm()
            } else {
                s_params[m_s - 1]
            };
            if total <= 0.0 {
                return Err(FilterError::Numeric("degenerate spline in simplify".into()));
            }
            for s in s_params.iter_mut() {
                *s /= total;
            }
            if !closed {
                s_params[m_s - 1] = 1.0;
            }
            let basis = sample_basis_matrix(&skeleton, &s_params).map_err(FilterError::from)?;
            let op = if closed {
                solve_operator(&basis, 1e-9).map_err(FilterError::from)?
            } else {
                pinned_fit_operator(&basis)?
            };
            (skeleton, op)
        };

        // Mean refit and the end-to-end linear map from old control
        // coordinates to new ones.
        let old_basis = sample_basis_matrix(&spline, &params).map_err(FilterError::from)?;
        let w_op = &fit_op * &old_basis;
        let w2 = interleave2(&w_op);

        let mut new_ctrl = vec![Point2::zeros(); budget];
        for (i, c) in new_ctrl.iter_mut().enumerate() {
            let mut x = 0.0;
            let mut y = 0.0;
            for (j, s) in samples.iter().enumerate() {
                x += fit_op[(i, j)] * s.x;
                y += fit_op[(i, j)] * s.y;
            }
            *c = Point2::new(x, y);
        }

        let knots = KnotVector::new(skeleton.knots().values().to_vec()).map_err(FilterError::from)?;
        let new_spline = if closed {
            BSpline::closed_from_parts(order, knots, new_ctrl).map_err(FilterError::from)?
        } else {
            BSpline::from_parts(order, knots, new_ctrl).map_err(FilterError::from)?
        };

        // New block covariance by cubature over the original block.
        let offset = self.belief.block_offset(label).expect("label present");
        let width = 2 * n;
        let block = self.belief.covariance().view((offset, offset), (width, width)).clone_owned();
        let mut mean = nalgebra::DVector::zeros(width);
        for (i, p) in spline.control_points().iter().enumerate() {
            mean[2 * i] = p.x;
            mean[2 * i + 1] = p.y;
        }
        let block_belief = GaussianBelief::new(mean, block).map_err(FilterError::from)?;
        let propagated =
            cubature_propagate(&block_belief, |x| Ok(&w2 * x)).map_err(FilterError::from)?;

        self.belief.replace_block(label, new_spline, propagated.covariance, &w2);
        Ok(())
    }

    /// Knot skeleton for the reduced spline: budget knots at equal quantiles
    /// of the curvature-plus-baseline weight profile, measured along the
    /// uniform-speed parameterization.
    fn reallocate_knots(
        &self,
        spline: &BSpline,
        params: &[f64],
        samples: &[Point2],
        budget: usize,
        baseline_weight: f64,
    ) -> Result<BSpline, FilterError> {
        let order = spline.order();
        let closed = spline.is_closed();
        let m_s = params.len();

        let sat = self.config.curvature_saturation.max(1e-6);
        let mut kappa: Vec<f64> = Vec::with_capacity(m_s);
        for &u in params {
            kappa.push(spline.curvature(u).map_err(FilterError::from)?.min(sat));
        }
        let total_kappa: f64 = kappa.iter().sum();
        let uniform = 1.0 / m_s as f64;
        let weights: Vec<f64> = if total_kappa < 1e-12 {
            vec![uniform; m_s]
        } else {
            kappa
                .iter()
                .map(|k| (1.0 - baseline_weight) * k / total_kappa + baseline_weight * uniform)
                .collect()
        };

        // Uniform-speed sample positions, matching the fit parameterization.
        let mut s_params = vec![0.0; m_s];
        for i in 1..m_s {
            s_params[i] = s_params[i - 1] + (samples[i] - samples[i - 1]).norm();
        }
        let total = if closed {
            s_params[m_s - 1] + (samples[0] - samples[m_s - 1]).norm()
        } else {
            s_params[m_s - 1]
        };
        if total <= 0.0 {
            return Err(FilterError::Numeric("degenerate spline in simplify".into()));
        }
        for s in s_params.iter_mut() {
            *s /= total;
        }
        if !closed {
            s_params[m_s - 1] = 1.0;
        }

        let skeleton = if closed {
            let mut breaks = vec![0.0];
            for j in 1..budget {
                breaks.push(quantile(&s_params, &weights, j as f64 / budget as f64));
            }
            breaks.push(1.0);
            enforce_min_gap(&mut breaks, 0.25 / budget as f64);
            let knots = periodic_knot_vector(&breaks, order);
            BSpline::closed_from_parts(
                order,
                KnotVector::new(knots).map_err(FilterError::from)?,
                vec![Point2::zeros(); budget],
            )
            .map_err(FilterError::from)?
        } else {
            let interior = budget - order;
            let mut inner = Vec::with_capacity(interior + 2);
            inner.push(0.0);
            for j in 1..=interior {
                inner.push(quantile(&s_params, &weights, j as f64 / (interior + 1) as f64));
            }
            inner.push(1.0);
            enforce_min_gap(&mut inner, 0.25 / budget as f64);
            let mut knots = vec![0.0; order];
            knots.extend_from_slice(&inner[1..inner.len() - 1]);
            knots.extend(std::iter::repeat(1.0).take(order));
            BSpline::from_parts(
                order,
                KnotVector::new(knots).map_err(FilterError::from)?,
                vec![Point2::zeros(); budget],
            )
            .map_err(FilterError::from)?
        };
        Ok(skeleton)
    }
}

/// Least-squares operator with the first and last control points pinned to
/// the first and last sample: rows 0 and B-1 select those samples, interior
/// rows solve the reduced normal equations with the pinned columns moved to
/// the right-hand side.
fn pinned_fit_operator(basis: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
    let m = basis.nrows();
    let b = basis.ncols();
    if b < 3 {
        return Err(FilterError::InvalidArgument("budget too small to pin endpoints".into()));
    }
    let mid = basis.columns(1, b - 2).clone_owned();
    let mut normal = mid.transpose() * &mid;
    for i in 0..b - 2 {
        normal[(i, i)] += 1e-9;
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| FilterError::Numeric("singular simplify system".into()))?;
    let t_mid = chol.solve(&mid.transpose()); // (b-2) x m

    // Effective sample map: y_eff = (I - n0 e0^T - nl el^T) y.
    let mut eff = DMatrix::identity(m, m);
    for r in 0..m {
        eff[(r, 0)] -= basis[(r, 0)];
        eff[(r, m - 1)] -= basis[(r, b - 1)];
    }
    let interior = &t_mid * eff;

    let mut op = DMatrix::zeros(b, m);
    op[(0, 0)] = 1.0;
    op[(b - 1, m - 1)] = 1.0;
    op.view_mut((1, 0), (b - 2, m)).copy_from(&interior);
    Ok(op)
}

/// Weighted quantile over sampled parameters (linear interpolation).
fn quantile(params: &[f64], weights: &[f64], q: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let target = q * total;
    let mut acc = 0.0;
    for i in 0..params.len() {
        let next = acc + weights[i];
        if next >= target {
            let frac = if weights[i] > 0.0 { (target - acc) / weights[i] } else { 0.0 };
            let lo = params[i];
            let hi = if i + 1 < params.len() { params[i + 1] } else { *params.last().unwrap() };
            return lo + frac * (hi - lo);
        }
        acc = next;
    }
    *params.last().unwrap()
}

/// Nudge an ascending break sequence so consecutive values differ by at
/// least `gap`, keeping the first and last pinned.
fn enforce_min_gap(values: &mut [f64], gap: f64) {
    let n = values.len();
    if n < 3 {
        return;
    }
    for i in 1..n {
        if values[i] < values[i - 1] + gap {
            values[i] = values[i - 1] + gap;
        }
    }
    let last = n - 1;
    let end = values[last];
    let first = values[0];
    for i in 1..last {
        values[i] = values[i].max(first + gap * i as f64).min(end - gap * (last - i) as f64);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_gap_spreads_clustered_breaks() {
        let mut v = vec![0.0, 0.5, 0.5, 0.5, 1.0];
        enforce_min_gap(&mut v, 0.01);
        for w in v.windows(2) {
            assert!(w[1] - w[0] >= 0.01 - 1e-12);
        }
        assert_eq!(v[0], 0.0);
        assert_eq!(v[4], 1.0);
    }

    #[test]
    fn quantiles_split_uniform_mass_evenly() {
        let params: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let weights = vec![1.0; 100];
        let q = quantile(&params, &weights, 0.5);
        assert!((q - 0.5).abs() < 0.02);
    }
}
