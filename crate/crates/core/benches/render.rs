//! Dense rendering throughput of every model at 1242x375, single thread
//! and on the global rayon pool. `cargo bench -p freespace-flow`.

use std::hint::black_box;
use std::time::{Duration, Instant};

use freespace_flow::*;

fn time(mut f: impl FnMut()) -> Duration {
    f();
    let mut best = Duration::MAX;
    let deadline = Instant::now() + Duration::from_secs(2);
    while Instant::now() < deadline {
        let t = Instant::now();
        f();
        best = best.min(t.elapsed());
    }
    best
}

fn main() {
    let k = CameraIntrinsics::new(721.5377, 721.5377, 609.5593, 172.854).unwrap();
    let m = MountConfig::new(1.65, 0.01).unwrap();
    let s = VelocityState {
        v_r: 12.0,
        delta_f: 0.05,
        l: 2.7,
        heading: 0.0,
    };
    let models = [
        (
            "full-disp",
            FlowModel::FullDisp(PoseDelta::new(0.05, 1.2, 0.01)),
        ),
        ("full-vel", FlowModel::FullVel(s)),
        ("simple-disp", FlowModel::SimpleDisp { z_d: 1.2 }),
        ("simple-vel", FlowModel::SimpleVel { v_r: 12.0 }),
        (
            "simplest",
            FlowModel::Simplest(SimplestMotion::Displacement { z_d: 1.2 }),
        ),
    ];
    for (name, model) in &models {
        let serial = time(|| {
            black_box(render_flow_map(1242, 375, None, model, &k, &m).unwrap());
        });
        let parallel = time(|| {
            black_box(render_flow_map_par(1242, 375, None, model, &k, &m).unwrap());
        });
        println!(
            "{name:12} serial {:7.3} ms ({:6.1} fps)   parallel {:7.3} ms ({:6.1} fps)",
            serial.as_secs_f64() * 1e3,
            1.0 / serial.as_secs_f64(),
            parallel.as_secs_f64() * 1e3,
            1.0 / parallel.as_secs_f64(),
        );
    }
}
