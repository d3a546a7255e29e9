//! Least-squares fitting helpers shared by the measurement fit, the
//! simplification pass, and spline bootstrapping.

use nalgebra::DMatrix;

use super::{BSpline, KnotVector};
use crate::error::SplineError;
use crate::geom::Point2;

/// Basis matrix with one row per parameter and one column per control point.
/// Columns of closed splines wrap modulo the control count.
pub fn sample_basis_matrix(spline: &BSpline, params: &[f64]) -> Result<DMatrix<f64>, SplineError> {
    let n = spline.n_control();
    let mut b = DMatrix::zeros(params.len(), n);
    for (r, &u) in params.iter().enumerate() {
        for (idx, w) in spline.support(u)? {
            b[(r, idx)] += w;
        }
    }
    Ok(b)
}

/// Ridge-stabilized normal-equation solve of min |B c - y|^2, applied to the
/// x and y target coordinates with the shared basis.
pub fn fit_least_squares(
    basis: &DMatrix<f64>,
    targets: &[Point2],
    ridge: f64,
) -> Result<Vec<Point2>, SplineError> {
    let op = solve_operator(basis, ridge)?;
    apply_fit_operator(&op, targets)
}

/// (B^T B + ridge I)^-1 B^T as an explicit matrix, so callers can push
/// covariances through the same linear map used for the mean.
pub fn solve_operator(basis: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>, SplineError> {
    let n = basis.ncols();
    let mut normal = basis.transpose() * basis;
    for i in 0..n {
        normal[(i, i)] += ridge;
    }
    let chol = normal.cholesky().ok_or_else(|| {
        SplineError::InvalidConfiguration("singular least-squares system".into())
    })?;
    Ok(chol.solve(&basis.transpose()))
}

pub fn apply_fit_operator(
    op: &DMatrix<f64>,
    targets: &[Point2],
) -> Result<Vec<Point2>, SplineError> {
    if op.ncols() != targets.len() {
        return Err(SplineError::InvalidConfiguration(
            "operator/target dimension mismatch".into(),
        ));
    }
    let mut out = vec![Point2::zeros(); op.nrows()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut x = 0.0;
        let mut y = 0.0;
        for (j, t) in targets.iter().enumerate() {
            x += op[(i, j)] * t.x;
            y += op[(i, j)] * t.y;
        }
        *o = Point2::new(x, y);
    }
    Ok(out)
}

/// Least-squares clamped cubic with `n_control` control points approximating
/// a polyline (chord-length parameters, uniform interior knots).
pub fn fit_clamped_cubic_to_polyline(
    points: &[Point2],
    n_control: usize,
) -> Result<BSpline, SplineError> {
    if points.len() < n_control {
        return Err(SplineError::InvalidConfiguration(
            "need at least as many samples as control points".into(),
        ));
    }
    let mut params = vec![0.0; points.len()];
    for i in 1..points.len() {
        params[i] = params[i - 1] + (points[i] - points[i - 1]).norm();
    }
    let total = params[points.len() - 1];
    if total <= 0.0 {
        return Err(SplineError::InvalidConfiguration("polyline has zero length".into()));
    }
    for p in params.iter_mut() {
        *p /= total;
    }
    let skeleton = BSpline::clamped_uniform(vec![Point2::zeros(); n_control], 4)?;
    let basis = sample_basis_matrix(&skeleton, &params)?;
    let ctrl = fit_least_squares(&basis, points, 1e-12)?;
    BSpline::from_parts(4, KnotVector::new(skeleton.knots().values().to_vec())?, ctrl)
}

/// Clamped cubic through all given points: chord-length parameters, knot
/// averaging, banded interpolation solve.
pub fn interpolate_clamped_cubic(points: &[Point2]) -> Result<BSpline, SplineError> {
    let order = 4;
    let degree = 3;
    let n = points.len();
    if n < order + 1 {
        return Err(SplineError::InvalidConfiguration(format!(
            "interpolation needs at least {} points, got {n}",
            order + 1
        )));
    }

    // Chord-length parameters.
    let mut params = vec![0.0; n];
    for i in 1..n {
        params[i] = params[i - 1] + (points[i] - points[i - 1]).norm();
    }
    let total = params[n - 1];
    if total <= 0.0 {
        return Err(SplineError::InvalidConfiguration(
            "interpolation points are coincident".into(),
        ));
    }
    for p in params.iter_mut() {
        *p /= total;
    }

    // Knot averaging keeps the interpolation matrix well conditioned.
    let mut knots = vec![0.0; n + order];
    for j in 1..n - degree {
        let avg: f64 = params[j..j + degree].iter().sum::<f64>() / degree as f64;
        knots[j + degree] = avg;
    }
    for j in 0..order {
        knots[n + j] = 1.0;
    }

    let skeleton =
        BSpline::from_parts(order, KnotVector::new(knots)?, vec![Point2::zeros(); n])?;
    let basis = sample_basis_matrix(&skeleton, &params)?;
    let lu = basis.clone().lu();
    let mut bx = DMatrix::zeros(n, 1);
    let mut by = DMatrix::zeros(n, 1);
    for (i, p) in points.iter().enumerate() {
        bx[(i, 0)] = p.x;
        by[(i, 0)] = p.y;
    }
    let cx = lu
        .solve(&bx)
        .ok_or_else(|| SplineError::InvalidConfiguration("singular interpolation system".into()))?;
    let cy = lu
        .solve(&by)
        .ok_or_else(|| SplineError::InvalidConfiguration("singular interpolation system".into()))?;
    let ctrl: Vec<Point2> = (0..n).map(|i| Point2::new(cx[(i, 0)], cy[(i, 0)])).collect();
    BSpline::from_parts(order, KnotVector::new(skeleton.knots().values().to_vec())?, ctrl)
}
