use pathspace::config::ExperimentConfig;
use pathspace::sim::{generate_track, Simulation};
use pathspace::slam::PathSpaceFilter;
use pathspace::{AgentPose, BoundaryLabel};

fn main() {
    let mut cfg = ExperimentConfig::comparison_defaults();
    cfg.laps = 2;
    let truth = generate_track(&cfg.track).unwrap();
    let mut sim = Simulation::new(truth.clone(), cfg.sensor, cfg.speed, cfg.dt, cfg.odo_noise_matrix(), cfg.seed);
    let mut f = PathSpaceFilter::new(cfg.pathspace.clone(), AgentPose::origin());
    let noise = cfg.odo_noise_matrix();
    for frame_i in 0..1380 {
        let frame = sim.step();
        let report = f.process_frame(&frame.detections, frame.odometry, &noise).unwrap();
        if !report.closed.is_empty() {
            println!("f{frame_i} CLOSED {:?}", report.closed);
        }
        if frame_i > 580 && frame_i < 720 && frame_i % 10 == 0 {
            for (l, s) in f.belief().splines() {
                let gap = (s.control_points()[0] - *s.control_points().last().unwrap()).norm();
                println!(
                    "f{frame_i} {l}: n={} closed={} arc={:.0} gap={:.1} closing={}",
                    s.n_control(), s.is_closed(), s.arc_length(), gap,
                    f.check_loop_closure(l)
                );
            }
        }
    }
    for (l, s) in f.belief().splines() {
        println!("final {l}: n={} closed={} arc={:.0}", s.n_control(), s.is_closed(), s.arc_length());
    }
}
