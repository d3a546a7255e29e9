//! Closest-point projection onto the curve.

use super::BSpline;
use crate::geom::Point2;

/// Result of projecting a point onto a spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub distance: f64,
    pub point: Point2,
}

/// Coarse samples per knot span before Newton refinement.
const SAMPLES_PER_SPAN: usize = 8;
/// Refinement tolerance in parameter space.
const U_TOL: f64 = 1e-9;
const MAX_NEWTON_ITERS: usize = 40;

impl BSpline {
    /// Closest point on the curve. Coarse sampling (8 per span) picks the
    /// global candidate, Newton on the squared distance refines it; ties in
    /// the coarse scan break toward the smaller parameter.
    pub fn project(&self, point: Point2) -> Projection {
        let (lo, hi) = self.domain();
        let rep = self.rep();

        // Distinct spans of the domain.
        let mut breaks: Vec<f64> = Vec::new();
        for &t in &rep.knots {
            if t >= lo - 1e-15 && t <= hi + 1e-15 {
                if breaks.last().map_or(true, |&b| t > b) {
                    breaks.push(t.clamp(lo, hi));
                }
            }
        }
        if breaks.len() < 2 {
            breaks = vec![lo, hi];
        }

        let mut best_u = lo;
        let mut best_d2 = f64::INFINITY;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            for i in 0..=SAMPLES_PER_SPAN {
                let u = a + (b - a) * i as f64 / SAMPLES_PER_SPAN as f64;
                let d2 = (rep.eval(u) - point).norm_squared();
                if d2 < best_d2 {
                    best_d2 = d2;
                    best_u = u;
                }
            }
        }

        let u = self.refine(point, best_u);
        let p = self.evaluate(u).expect("refined parameter stays in domain");
        Projection { u, distance: (p - point).norm(), point: p }
    }

    /// Newton iteration on g(u) = |S(u) - p|^2.
    fn refine(&self, point: Point2, start: f64) -> f64 {
        let (lo, hi) = self.domain();
        let clamp = |u: f64| -> f64 {
            if self.is_closed() {
                (u - lo).rem_euclid(hi - lo) + lo
            } else {
                u.clamp(lo, hi)
            }
        };
        let mut u = start;
        let mut best_u = u;
        let mut best_d2 = (self.evaluate(u).unwrap() - point).norm_squared();
        for _ in 0..MAX_NEWTON_ITERS {
            let s = self.evaluate(u).unwrap();
            let d1 = self.derivative(u, 1).unwrap();
            let d2v = self.derivative(u, 2).unwrap();
            let diff = s - point;
            let g1 = 2.0 * diff.dot(&d1);
            let g2 = 2.0 * (d1.norm_squared() + diff.dot(&d2v));
            if g2.abs() < 1e-300 {
                break;
            }
            let mut step = -g1 / g2;
            // Keep steps within one average span of the start to avoid
            // hopping between local minima.
            let max_step = (hi - lo) / (self.n_control() as f64);
            if step.abs() > max_step {
                step = step.signum() * max_step;
            }
            let next = clamp(u + step);
            let nd2 = (self.evaluate(next).unwrap() - point).norm_squared();
            if nd2 < best_d2 {
                best_d2 = nd2;
                best_u = next;
            }
            if (next - u).abs() < U_TOL {
                u = next;
                break;
            }
            u = next;
        }
        let final_d2 = (self.evaluate(u).unwrap() - point).norm_squared();
        if final_d2 <= best_d2 {
            u
        } else {
            best_u
        }
    }
}
