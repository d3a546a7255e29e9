//! Gaussian beliefs over control points and the cubature transform used to
//! push them through nonlinear maps.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::UncertaintyError;
use crate::spline::BasisRow;

/// Mean and covariance over a flattened state (2D coordinates interleaved as
/// x0, y0, x1, y1, ...).
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, UncertaintyError> {
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != mean.len() {
            return Err(UncertaintyError::InvalidConfiguration(
                "covariance shape does not match mean".into(),
            ));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Equal-weight cubature point set: 2d points at mean +- sqrt(d) * L e_i.
#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

/// Cholesky factor with diagonal jitter escalation (1e-12 to 1e-6, x10).
pub(crate) fn robust_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, UncertaintyError> {
    if cov.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(cov.nrows(), cov.ncols()));
    }
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.l());
    }
    let mut jitter = 1e-12;
    while jitter <= 1e-6 {
        let mut c = cov.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter;
        }
        if let Some(chol) = c.cholesky() {
            return Ok(chol.l());
        }
        jitter *= 10.0;
    }
    Err(UncertaintyError::NotFactorizable)
}

/// Spherical-radial cubature points for the belief.
pub fn cubature_points(belief: &GaussianBelief) -> Result<SigmaPointSet, UncertaintyError> {
    let d = belief.dim();
    if d == 0 {
        return Err(UncertaintyError::InvalidConfiguration("empty state".into()));
    }
    let l = robust_cholesky(&belief.covariance)?;
    let scale = (d as f64).sqrt();
    let mut points = Vec::with_capacity(2 * d);
    for i in 0..d {
        let col = l.column(i) * scale;
        points.push(&belief.mean + &col);
        points.push(&belief.mean - &col);
    }
    let w = 1.0 / (2.0 * d as f64);
    Ok(SigmaPointSet { points, weights: vec![w; 2 * d] })
}

/// Push the belief through `map` and rebuild moments from the transformed
/// points. The output covariance is symmetrized. The map must be pure: it is
/// invoked once per sigma point and must not carry state across calls.
pub fn cubature_propagate<F>(
    belief: &GaussianBelief,
    mut map: F,
) -> Result<GaussianBelief, UncertaintyError>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>, String>,
{
    let set = cubature_points(belief)?;
    let mut mapped = Vec::with_capacity(set.points.len());
    for (i, p) in set.points.iter().enumerate() {
        let out = map(p).map_err(|reason| UncertaintyError::Propagation {
            point_index: i,
            reason,
        })?;
        mapped.push(out);
    }
    Ok(moments_from_points(&mapped, &set.weights))
}

/// Weighted mean and symmetrized weighted covariance of a point cloud.
pub fn moments_from_points(points: &[DVector<f64>], weights: &[f64]) -> GaussianBelief {
    let dim = points[0].len();
    let mut mean = DVector::zeros(dim);
    for (p, w) in points.iter().zip(weights) {
        mean += p * *w;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for (p, w) in points.iter().zip(weights) {
        let d = p - &mean;
        cov.ger(*w, &d, &d, 1.0);
    }
    let cov = symmetrize(&cov);
    GaussianBelief { mean, covariance: cov }
}

/// (P + P^T) / 2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Continuous covariance of a point on the spline: sum of marginal 2x2
/// control blocks weighted by squared basis values. Cross-covariances
/// between control points are deliberately excluded.
pub fn point_covariance(
    belief: &GaussianBelief,
    basis_row: &BasisRow,
) -> Result<Matrix2<f64>, UncertaintyError> {
    let pairs: Vec<(usize, f64)> = basis_row
        .weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (basis_row.start_index + i, w))
        .collect();
    point_covariance_weighted(&belief.covariance, &pairs)
}

/// Same as [`point_covariance`] over resolved (control index, weight) pairs,
/// which closed splines need for wrapped supports.
pub fn point_covariance_weighted(
    control_cov: &DMatrix<f64>,
    pairs: &[(usize, f64)],
) -> Result<Matrix2<f64>, UncertaintyError> {
    let n = control_cov.nrows() / 2;
    let mut out = Matrix2::zeros();
    for &(idx, w) in pairs {
        if idx >= n {
            return Err(UncertaintyError::InvalidConfiguration(format!(
                "control index {idx} out of range for {n} control points"
            )));
        }
        let b = 2 * idx;
        let w2 = w * w;
        out[(0, 0)] += w2 * control_cov[(b, b)];
        out[(0, 1)] += w2 * control_cov[(b, b + 1)];
        out[(1, 0)] += w2 * control_cov[(b + 1, b)];
        out[(1, 1)] += w2 * control_cov[(b + 1, b + 1)];
    }
    Ok(out)
}

/// Expand an n x m matrix to 2n x 2m by acting identically on interleaved
/// x/y coordinates.
pub(crate) fn interleave2(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * m.nrows(), 2 * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(2 * i, 2 * j)] = m[(i, j)];
            out[(2 * i + 1, 2 * j + 1)] = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(dim, dim) * 1e-6
    }

    #[test]
    fn one_dimensional_points_are_plus_minus_one() {
        // CKF rule: mu +- sqrt(d) * sqrt(Sigma) e_i with d = 1.
        let belief =
            GaussianBelief::new(DVector::from_vec(vec![0.0]), DMatrix::from_vec(1, 1, vec![1.0]))
                .unwrap();
        let set = cubature_points(&belief).unwrap();
        assert_eq!(set.points.len(), 2);
        assert!((set.points[0][0] - 1.0).abs() < 1e-15);
        assert!((set.points[1][0] + 1.0).abs() < 1e-15);
        assert_eq!(set.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_covariance_collapses_to_mean() {
        let mean = DVector::from_vec(vec![2.0, -3.0]);
        let belief = GaussianBelief::new(mean.clone(), DMatrix::zeros(2, 2)).unwrap();
        let set = cubature_points(&belief).unwrap();
        for p in &set.points {
            assert!((p - &mean).norm() == 0.0);
        }
    }

    #[test]
    fn moment_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..60 {
            let dim = rng.random_range(1..=64);
            let cov = random_psd(&mut rng, dim);
            let mean = DVector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
            let belief = GaussianBelief::new(mean.clone(), cov.clone()).unwrap();
            let set = cubature_points(&belief).unwrap();
            let rec = moments_from_points(&set.points, &set.weights);
            assert!((rec.mean - mean).norm() < 1e-9);
            assert!((rec.covariance - cov).norm() < 1e-9 * (1.0 + dim as f64));
        }
    }

    #[test]
    fn affine_maps_propagate_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..50 {
            let dim = rng.random_range(1..=8);
            let cov = random_psd(&mut rng, dim);
            let mean = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let belief = GaussianBelief::new(mean.clone(), cov.clone()).unwrap();
            let out = cubature_propagate(&belief, |x| Ok(&a * x + &b)).unwrap();
            let want_mean = &a * &mean + &b;
            let want_cov = &a * &cov * a.transpose();
            assert!((out.mean - want_mean).norm() < 1e-9);
            assert!((out.covariance - want_cov).norm() < 1e-8);
        }
    }

    #[test]
    fn identity_map_returns_the_belief() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let cov = random_psd(&mut rng, 6);
        let mean = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
        let belief = GaussianBelief::new(mean.clone(), cov.clone()).unwrap();
        let out = cubature_propagate(&belief, |x| Ok(x.clone())).unwrap();
        assert!((out.mean - mean).norm() < 1e-12);
        assert!((out.covariance - cov).norm() < 1e-11);
    }

    #[test]
    fn squaring_a_standard_normal_has_unit_mean() {
        // By hand: points are +-1, map x -> x^2 sends both to 1.
        let belief =
            GaussianBelief::new(DVector::from_vec(vec![0.0]), DMatrix::from_vec(1, 1, vec![1.0]))
                .unwrap();
        let out = cubature_propagate(&belief, |x| {
            Ok(DVector::from_vec(vec![x[0] * x[0]]))
        })
        .unwrap();
        assert!((out.mean[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_failure_identifies_the_sigma_point() {
        let belief =
            GaussianBelief::new(DVector::from_vec(vec![0.0]), DMatrix::from_vec(1, 1, vec![1.0]))
                .unwrap();
        let err = cubature_propagate(&belief, |x| {
            if x[0] < 0.0 {
                Err("negative branch".into())
            } else {
                Ok(x.clone())
            }
        })
        .unwrap_err();
        match err {
            UncertaintyError::Propagation { point_index, .. } => assert_eq!(point_index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn point_covariance_at_clamped_end_is_the_first_block() {
        let n = 5;
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            cov[(2 * i, 2 * i)] = (i + 1) as f64;
            cov[(2 * i + 1, 2 * i + 1)] = (i + 1) as f64 * 2.0;
        }
        let row = BasisRow { start_index: 0, weights: vec![1.0, 0.0, 0.0, 0.0] };
        let belief = GaussianBelief::new(DVector::zeros(2 * n), cov).unwrap();
        let out = point_covariance(&belief, &row).unwrap();
        assert!((out[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((out[(1, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn isotropic_bezier_midpoint_variance_is_reduced() {
        // Oracle: sum of squared Bernstein weights at u=0.5 is 0.3125.
        let sigma2 = 4.0;
        let n = 4;
        let cov = DMatrix::identity(2 * n, 2 * n) * sigma2;
        let row = BasisRow { start_index: 0, weights: vec![0.125, 0.375, 0.375, 0.125] };
        let belief = GaussianBelief::new(DVector::zeros(2 * n), cov).unwrap();
        let out = point_covariance(&belief, &row).unwrap();
        assert!((out[(0, 0)] - 0.3125 * sigma2).abs() < 1e-12);
        assert!((out[(1, 1)] - 0.3125 * sigma2).abs() < 1e-12);
        assert!(out[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn isotropic_bound_holds_along_the_domain() {
        // Sum beta^2 <= (sum beta)^2 = 1 for nonnegative weights.
        let sigma2 = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..100 {
            let s = crate::spline::tests::random_cubic(&mut rng, 4, 12);
            let n = s.n_control();
            let cov = DMatrix::identity(2 * n, 2 * n) * sigma2;
            let u = rng.random_range(0.0..=1.0);
            let row = s.basis(u).unwrap();
            let belief = GaussianBelief::new(DVector::zeros(2 * n), cov).unwrap();
            let out = point_covariance(&belief, &row).unwrap();
            assert!(out[(0, 0)] <= sigma2 + 1e-12);
            assert!(out[(1, 1)] <= sigma2 + 1e-12);
        }
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let cov = DMatrix::identity(4, 4);
        let row = BasisRow { start_index: 1, weights: vec![0.5, 0.5] };
        let belief = GaussianBelief::new(DVector::zeros(4), cov).unwrap();
        assert!(point_covariance(&belief, &row).is_err());
    }
}
