//! Deterministic B-spline geometry: basis evaluation, derivatives, curvature,
//! projection, extension, loop closure, and arc length. No probabilistic
//! content lives here.

mod arclen;
mod close;
mod extend;
mod fit;
mod project;

pub use close::ClosureParams;
pub(crate) use close::periodic_knot_vector;
pub use extend::Extension;
pub use fit::{
    apply_fit_operator, fit_clamped_cubic_to_polyline, fit_least_squares,
    interpolate_clamped_cubic, sample_basis_matrix, solve_operator,
};
pub use project::Projection;

use crate::error::SplineError;
use crate::geom::Point2;

/// Non-decreasing parameter breakpoints. Length is tied to the owning
/// spline: `control_points + order` when open, `control_points + 2*order - 1`
/// when the spline is closed (the extra values carry the periodic extension).
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    values: Vec<f64>,
}

impl KnotVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SplineError> {
        if values.len() < 2 {
            return Err(SplineError::InvalidConfiguration(
                "knot vector needs at least two values".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::InvalidConfiguration(
                "knot vector must be non-decreasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Clamped knot vector with `first order` values 0, last `order` values 1
    /// and uniformly spaced interior values.
    pub fn clamped_uniform(n_control: usize, order: usize) -> Result<Self, SplineError> {
        if order < 2 {
            return Err(SplineError::InvalidConfiguration("order must be >= 2".into()));
        }
        if n_control < order {
            return Err(SplineError::InvalidConfiguration(format!(
                "need at least {order} control points for order {order}, got {n_control}"
            )));
        }
        let interior = n_control - order;
        let mut values = vec![0.0; order];
        for i in 1..=interior {
            values.push(i as f64 / (interior + 1) as f64);
        }
        values.extend(std::iter::repeat(1.0).take(order));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn multiplicity_front(&self) -> usize {
        let first = self.values[0];
        self.values.iter().take_while(|&&v| v == first).count()
    }

    fn multiplicity_back(&self) -> usize {
        let last = *self.values.last().unwrap();
        self.values.iter().rev().take_while(|&&v| v == last).count()
    }
}

/// Basis weights at one parameter value. `start_index` is the first control
/// point with nonzero weight; for closed splines it indexes the periodic
/// extension and wraps modulo the control count (see [`BSpline::support`]).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRow {
    pub start_index: usize,
    pub weights: Vec<f64>,
}

/// Piecewise polynomial curve of order `k` (degree `k - 1`).
#[derive(Debug, Clone)]
pub struct BSpline {
    order: usize,
    knots: KnotVector,
    control_points: Vec<Point2>,
    clamped_left: bool,
    clamped_right: bool,
    closed: bool,
}

impl BSpline {
    /// Clamped spline over a uniform knot vector.
    pub fn clamped_uniform(control_points: Vec<Point2>, order: usize) -> Result<Self, SplineError> {
        let knots = KnotVector::clamped_uniform(control_points.len(), order)?;
        Self::from_parts(order, knots, control_points)
    }

    /// Open spline from explicit knots. Clamping flags are derived from the
    /// end-knot multiplicities.
    pub fn from_parts(
        order: usize,
        knots: KnotVector,
        control_points: Vec<Point2>,
    ) -> Result<Self, SplineError> {
        if order < 2 {
            return Err(SplineError::InvalidConfiguration("order must be >= 2".into()));
        }
        if control_points.len() < order {
            return Err(SplineError::InvalidConfiguration(format!(
                "need at least {} control points, got {}",
                order,
                control_points.len()
            )));
        }
        if knots.len() != control_points.len() + order {
            return Err(SplineError::InvalidConfiguration(format!(
                "knot count {} does not match control count {} + order {}",
                knots.len(),
                control_points.len(),
                order
            )));
        }
        let clamped_left = knots.multiplicity_front() >= order;
        let clamped_right = knots.multiplicity_back() >= order;
        Ok(Self { order, knots, control_points, clamped_left, clamped_right, closed: false })
    }

    /// Closed (periodic) spline. `knots` must hold `control + 2*order - 1`
    /// values satisfying the periodic condition `t[j + n] = t[j] + period`.
    pub(crate) fn closed_from_parts(
        order: usize,
        knots: KnotVector,
        control_points: Vec<Point2>,
    ) -> Result<Self, SplineError> {
        if control_points.len() < order {
            return Err(SplineError::InvalidConfiguration(
                "closed spline needs at least `order` control points".into(),
            ));
        }
        if knots.len() != control_points.len() + 2 * order - 1 {
            return Err(SplineError::InvalidConfiguration(format!(
                "closed spline knot count {} does not match control count {} + 2*order - 1",
                knots.len(),
                control_points.len()
            )));
        }
        Ok(Self {
            order,
            knots,
            control_points,
            clamped_left: false,
            clamped_right: false,
            closed: true,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub(crate) fn control_points_mut(&mut self) -> &mut [Point2] {
        &mut self.control_points
    }

    pub fn n_control(&self) -> usize {
        self.control_points.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_clamped_left(&self) -> bool {
        self.clamped_left
    }

    pub fn is_clamped_right(&self) -> bool {
        self.clamped_right
    }

    /// Parameter domain over which the basis is a partition of unity.
    pub fn domain(&self) -> (f64, f64) {
        let rep_knots = self.knots.values();
        let d = self.degree();
        (rep_knots[d], rep_knots[rep_knots.len() - self.order])
    }

    /// Validate and normalize a parameter: clamps values within 1e-9 of the
    /// domain ends, wraps periodically for closed splines.
    fn checked_u(&self, u: f64) -> Result<f64, SplineError> {
        let (lo, hi) = self.domain();
        if self.closed {
            let period = hi - lo;
            let mut v = (u - lo).rem_euclid(period) + lo;
            if v > hi {
                v = hi;
            }
            return Ok(v);
        }
        if u < lo - 1e-9 || u > hi + 1e-9 {
            return Err(SplineError::OutOfDomain { u, lo, hi });
        }
        Ok(u.clamp(lo, hi))
    }

    /// Control points of the evaluation representation: identical to
    /// `control_points` when open; periodically extended by `order - 1`
    /// wrapped points when closed.
    fn rep_control(&self) -> Vec<Point2> {
        if self.closed {
            let mut ext = self.control_points.clone();
            ext.extend_from_slice(&self.control_points[..self.order - 1]);
            ext
        } else {
            self.control_points.clone()
        }
    }

    pub(crate) fn rep(&self) -> Rep {
        Rep { degree: self.degree(), knots: self.knots.values().to_vec(), ctrl: self.rep_control() }
    }

    /// Nonzero basis weights at `u` (Cox-de Boor recursion, 0/0 := 0). The
    /// right end of a right-clamped domain uses the closed-right convention
    /// so the final weight is 1 there.
    pub fn basis(&self, u: f64) -> Result<BasisRow, SplineError> {
        let u = self.checked_u(u)?;
        let rep = self.rep();
        let span = rep.find_span(u);
        let weights = basis_funs(&rep.knots, span, rep.degree, u);
        Ok(BasisRow { start_index: span - rep.degree, weights })
    }

    /// Basis support resolved to actual control-point indices (wrapping for
    /// closed splines), paired with weights.
    pub fn support(&self, u: f64) -> Result<Vec<(usize, f64)>, SplineError> {
        let row = self.basis(u)?;
        let n = self.n_control();
        Ok(row
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| ((row.start_index + i) % n, w))
            .collect())
    }

    /// Point on the curve at `u`.
    pub fn evaluate(&self, u: f64) -> Result<Point2, SplineError> {
        let u = self.checked_u(u)?;
        let rep = self.rep();
        Ok(rep.eval(u))
    }

    /// Derivative of the stated order, computed by evaluating the derivative
    /// spline of reduced degree.
    pub fn derivative(&self, u: f64, der_order: usize) -> Result<Point2, SplineError> {
        if der_order == 0 || der_order > self.degree() {
            return Err(SplineError::InvalidConfiguration(format!(
                "derivative order {} not in 1..={}",
                der_order,
                self.degree()
            )));
        }
        let u = self.checked_u(u)?;
        let mut rep = self.rep();
        for _ in 0..der_order {
            rep = rep.derivative();
        }
        Ok(rep.eval(u))
    }

    /// Planar curvature |x'y'' - y'x''| / |S'|^3. Degenerate (zero-speed)
    /// points report zero curvature with the flag set.
    pub fn curvature_flagged(&self, u: f64) -> Result<(f64, bool), SplineError> {
        let d1 = self.derivative(u, 1)?;
        let d2 = self.derivative(u, 2)?;
        let speed_sq = d1.norm_squared();
        if speed_sq < 1e-18 {
            return Ok((0.0, true));
        }
        let cross = d1.x * d2.y - d1.y * d2.x;
        Ok((cross.abs() / speed_sq.powf(1.5), false))
    }

    pub fn curvature(&self, u: f64) -> Result<f64, SplineError> {
        self.curvature_flagged(u).map(|(k, _)| k)
    }
}

/// Plain open evaluation data (knots + control points, no wrapping). Closed
/// splines evaluate through their periodic extension in this form.
pub(crate) struct Rep {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub ctrl: Vec<Point2>,
}

impl Rep {
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.knots.len() - 1 - self.degree])
    }

    pub fn find_span(&self, u: f64) -> usize {
        find_span(&self.knots, self.degree, u)
    }

    pub fn eval(&self, u: f64) -> Point2 {
        let span = self.find_span(u);
        let w = basis_funs(&self.knots, span, self.degree, u);
        let mut p = Point2::zeros();
        for (i, wi) in w.iter().enumerate() {
            p += self.ctrl[span - self.degree + i] * *wi;
        }
        p
    }

    /// Derivative spline: degree drops by one, knots lose their end values,
    /// control points become scaled forward differences.
    pub fn derivative(&self) -> Rep {
        let p = self.degree as f64;
        let mut ctrl = Vec::with_capacity(self.ctrl.len() - 1);
        for i in 0..self.ctrl.len() - 1 {
            let denom = self.knots[i + self.degree + 1] - self.knots[i + 1];
            if denom > 0.0 {
                ctrl.push((self.ctrl[i + 1] - self.ctrl[i]) * (p / denom));
            } else {
                ctrl.push(Point2::zeros());
            }
        }
        Rep {
            degree: self.degree - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            ctrl,
        }
    }
}

/// Index of the knot span containing `u`: the largest valid span index `s`
/// with `knots[s] <= u < knots[s+1]`, using the closed-right convention at
/// the domain end.
pub(crate) fn find_span(knots: &[f64], degree: usize, u: f64) -> usize {
    let order = degree + 1;
    let s_min = degree;
    let s_max = knots.len() - order - 1;
    if u >= knots[s_max + 1] {
        let mut s = s_max;
        while s > s_min && knots[s] >= knots[s + 1] {
            s -= 1;
        }
        return s;
    }
    if u <= knots[s_min] {
        let mut s = s_min;
        while s < s_max && knots[s + 1] <= u {
            s += 1;
        }
        return s;
    }
    let mut lo = s_min;
    let mut hi = s_max;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if knots[mid] <= u {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// The `degree + 1` nonzero basis values at `u` for the given span
/// (triangular Cox-de Boor scheme; divisions by zero follow 0/0 := 0).
pub(crate) fn basis_funs(knots: &[f64], span: usize, degree: usize, u: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Basis values and derivatives up to `n_ders` at `u`: `ders[d][j]` is the
/// d-th derivative of the basis function `span - degree + j`.
pub(crate) fn ders_basis_funs(
    knots: &[f64],
    span: usize,
    degree: usize,
    u: f64,
    n_ders: usize,
) -> Vec<Vec<f64>> {
    let p = degree;
    let n = n_ders.min(p);
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = if ndu[j][r] != 0.0 { ndu[r][j - 1] / ndu[j][r] } else { 0.0 };
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; n_ders + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let mut s1 = 0usize;
        let mut s2 = 1usize;
        a[0].iter_mut().for_each(|v| *v = 0.0);
        a[1].iter_mut().for_each(|v| *v = 0.0);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as i64 - k as i64;
            let pk = p - k;
            if r >= k {
                let denom = ndu[pk + 1][rk as usize];
                a[s2][0] = if denom != 0.0 { a[s1][0] / denom } else { 0.0 };
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as i64 - 1 <= pk as i64 { k - 1 } else { p - r };
            for j in j1..=j2 {
                let denom = ndu[pk + 1][(rk + j as i64) as usize];
                a[s2][j] = if denom != 0.0 { (a[s1][j] - a[s1][j - 1]) / denom } else { 0.0 };
                d += a[s2][j] * ndu[(rk + j as i64) as usize][pk];
            }
            if r <= pk {
                let denom = ndu[pk + 1][r];
                a[s2][k] = if denom != 0.0 { -a[s1][k - 1] / denom } else { 0.0 };
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=n {
        for j in 0..=p {
            ders[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}
