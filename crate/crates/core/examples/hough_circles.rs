//! Renders the markers at the goal configuration as a stereo pair, recovers
//! the circle centers with the Hough accumulator and compares the resulting
//! features with direct projection.
//!
//! ```text
//! cargo run --example hough_circles [-- OUT_DIR]
//! ```

use std::path::PathBuf;

use ibvs::io::write_pgm;
use ibvs::kinematics::tool_points_base;
use ibvs::servo::{features_of_joints, ServoPlant};
use ibvs::sim::{builtin_scenario, start_joints, target_joints};
use ibvs::vision::{edge_pixels, extract_feature_vector, hough_circles, render_stereo, Marker};

fn main() -> anyhow::Result<()> {
    let cfg = builtin_scenario(1).expect("built-in scenario");
    let sc = cfg.resolve()?;
    let q = target_joints(&sc, &start_joints(&sc)?)?;
    let pmap = cfg.vision.pixel_map(&sc.intrinsics);
    let (p1, p2) = tool_points_base(&sc.true_geometry, &q);
    let markers = [
        Marker { position: p1, radius: cfg.vision.marker_radii[0] },
        Marker { position: p2, radius: cfg.vision.marker_radii[1] },
    ];
    let (left, right) = render_stereo(&markers, &sc.camera, &sc.intrinsics, &pmap)?;
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        write_pgm(&dir.join("left.pgm"), &left)?;
        write_pgm(&dir.join("right.pgm"), &right)?;
        println!("wrote {}/left.pgm and right.pgm", dir.display());
    }

    let params = cfg.vision.hough.params();
    for (name, img) in [("left", &left), ("right", &right)] {
        let edges = edge_pixels(img, params.edge_threshold);
        let circles = hough_circles(&edges, img.width(), img.height(), &params)?;
        println!("{name}: {} edge pixels", edges.len());
        for c in circles {
            println!("  center ({:.2}, {:.2}) px  r {:.2} px  votes {}", c.a, c.b, c.r, c.votes);
        }
    }

    let seen = extract_feature_vector(&left, &right, &params, &pmap, &sc.intrinsics)?;
    let plant = ServoPlant { geometry: sc.true_geometry, intrinsics: sc.intrinsics, camera: sc.camera };
    let ideal = features_of_joints(&plant, &q).features;
    let px = pmap.pixel_mm(&sc.intrinsics);
    println!("feature   hough (mm)   ideal (mm)   error (px)");
    for (i, name) in ["ul1", "ur1", "v1", "ul2", "ur2", "v2"].iter().enumerate() {
        println!("{name:<9} {:+.5}     {:+.5}     {:.3}", seen.0[i], ideal.0[i], (seen.0[i] - ideal.0[i]).abs() / px);
    }
    Ok(())
}
