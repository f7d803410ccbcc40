//! Pinhole stereo projection of the two tool markers and triangulation back
//! to 3D, at the start of each built-in scenario.

use ibvs::kinematics::tool_points_base;
use ibvs::sim::{builtin_scenarios, start_joints, start_visibility};
use ibvs::stereo::{camera_to_world, project, triangulate, world_to_camera, CameraIntrinsics};

fn main() -> anyhow::Result<()> {
    for cfg in builtin_scenarios() {
        let sc = cfg.resolve()?;
        let q = start_joints(&sc)?;
        let (p1, p2) = tool_points_base(&sc.true_geometry, &q);
        println!("{} (visible {:?})", cfg.name, start_visibility(&cfg)?);
        for (i, p) in [p1, p2].iter().enumerate() {
            let pc = world_to_camera(&sc.camera, p);
            match project(&sc.intrinsics, &pc) {
                Ok(ip) => {
                    let back = camera_to_world(&sc.camera, &triangulate(&sc.intrinsics, &ip)?);
                    println!(
                        "  marker {}: base {:.4?} cam Z {:.4} m  ul {:+.4} ur {:+.4} v {:+.4} mm  disparity {:.4} mm  round trip {:.1e} m",
                        i + 1,
                        p.as_slice(),
                        pc.z,
                        ip.ul,
                        ip.ur,
                        ip.v,
                        ip.disparity(),
                        (back - p).norm()
                    );
                }
                Err(e) => println!("  marker {}: {e}", i + 1),
            }
        }
    }
    let intr = CameraIntrinsics::default();
    println!("image plane half extents: {:.4} x {:.4} mm", intr.u_max(), intr.v_max());
    Ok(())
}
