use pathspace::geom::Point2;
use pathspace::spline::{interpolate_clamped_cubic, BSpline, KnotVector};

// Relaxed append: keep control points, reduce terminal multiplicity to 1,
// append the target as the new end control point, re-clamp at 1 + delta.
fn extend_append(s: &BSpline, z: Point2) -> BSpline {
    let k = s.order();
    let old = s.knots().values();
    let (lo, hi) = s.domain();
    let chord_total: f64 = s.control_points().windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let chord_new = (z - s.control_points().last().unwrap()).norm();
    let delta = (hi - lo) * chord_new / chord_total.max(1e-12);
    let mut knots: Vec<f64> = old[..old.len() - k].to_vec();
    knots.push(hi);
    knots.extend(std::iter::repeat(hi + delta).take(k));
    let span = hi + delta - knots[0];
    let start = knots[0];
    for t in knots.iter_mut() { *t = (*t - start) / span; }
    let mut ctrl = s.control_points().to_vec();
    ctrl.push(z);
    BSpline::from_parts(k, KnotVector::new(knots).unwrap(), ctrl).unwrap()
}

fn main() {
    let r = 25.0;
    let spacing = 5.0;
    let n_pts = 60;
    let ring: Vec<Point2> = (0..n_pts)
        .map(|i| {
            let a = spacing * i as f64 / r - std::f64::consts::FRAC_PI_2;
            Point2::new(r * a.cos(), r * (a.sin() + 1.0))
        })
        .collect();
    let mut s = interpolate_clamped_cubic(&ring[..5]).unwrap();
    let mut worst_dev: f64 = 0.0;
    for j in 5..n_pts {
        let before = s.clone();
        s = extend_append(&s, ring[j]);
        let t = s.derivative(1.0, 1).unwrap();
        let tang = t.y.atan2(t.x).to_degrees();
        let a = spacing * j as f64 / r - std::f64::consts::FRAC_PI_2;
        let truth = (a + std::f64::consts::FRAC_PI_2).to_degrees();
        let mut err = tang - truth;
        while err > 180.0 { err -= 360.0 }
        while err < -180.0 { err += 360.0 }
        // Deviation of the new curve from the old one over the old domain.
        let mut dev: f64 = 0.0;
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let p = before.evaluate(u).unwrap();
            dev = dev.max(s.project(p).distance);
        }
        worst_dev = worst_dev.max(dev);
        if j % 5 == 0 || j < 12 {
            println!("ext {j:2}: tang err {err:7.3} deg, old-domain dev {dev:.4} m");
        }
    }
    // Accuracy of the final map vs the ring.
    let mut worst_ring: f64 = 0.0;
    for p in &ring[..n_pts] {
        worst_ring = worst_ring.max(s.project(*p).distance);
    }
    println!("worst old-domain dev {worst_dev:.4} m; worst ring dist {worst_ring:.4} m");
}
