//! Arc length via Gauss-Legendre quadrature per knot span.

use super::BSpline;

const DEFAULT_ORDER: usize = 16;

impl BSpline {
    /// Curve length over the whole domain.
    pub fn arc_length(&self) -> f64 {
        self.arc_length_with_order(DEFAULT_ORDER)
    }

    /// Curve length with an explicit quadrature order (used by convergence
    /// checks).
    pub fn arc_length_with_order(&self, quad_order: usize) -> f64 {
        let (nodes, weights) = gauss_legendre(quad_order.max(2));
        let (lo, hi) = self.domain();
        let rep = self.rep();
        let speed_rep = rep.derivative();

        let mut breaks: Vec<f64> = Vec::new();
        for &t in &rep.knots {
            if t >= lo - 1e-15 && t <= hi + 1e-15 && breaks.last().map_or(true, |&b| t > b) {
                breaks.push(t.clamp(lo, hi));
            }
        }
        if breaks.len() < 2 {
            breaks = vec![lo, hi];
        }

        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut span_len = 0.0;
            for (x, wt) in nodes.iter().zip(weights.iter()) {
                let u = mid + half * x;
                span_len += wt * speed_rep.eval(u).norm();
            }
            total += span_len * half;
        }
        total
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::gauss_legendre;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        // n-point Gauss-Legendre is exact through degree 2n-1.
        let (nodes, weights) = gauss_legendre(5);
        let integral: f64 =
            nodes.iter().zip(&weights).map(|(x, w)| w * (x.powi(8) + x.powi(3))).sum();
        // int_{-1}^{1} x^8 dx = 2/9, odd term vanishes.
        assert!((integral - 2.0 / 9.0).abs() < 1e-12);
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }
}
