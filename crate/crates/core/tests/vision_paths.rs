mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ibvs::stereo::CameraIntrinsics;
use ibvs::vision::{
    edge_pixels, extract_feature_vector, hough_circles, render_stereo, HoughParams, PixelMap, MARKER_RADII,
};

#[test]
fn hough_recovers_ring_centers_within_a_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = HoughParams { r_min: 6, r_max: 64, ..HoughParams::default() };
    for _ in 0..50 {
        let (img, a, b, r) = common::random_ring(&mut rng);
        let edges = edge_pixels(&img, params.edge_threshold);
        let found = hough_circles(&edges, img.width(), img.height(), &params).unwrap();
        assert_eq!(found.len(), 1, "ring r={r:.2} at ({a:.2}, {b:.2}): {found:?}");
        let c = found[0];
        assert!((c.a - a).hypot(c.b - b) <= 1.0, "center ({}, {}) vs ({a}, {b})", c.a, c.b);
        assert!((c.r - r).abs() <= 1.0);
        // fixed iteration order
        assert_eq!(hough_circles(&edges, img.width(), img.height(), &params).unwrap(), found);
    }
}

#[test]
fn rendered_features_match_projection() {
    let intr = CameraIntrinsics::default();
    let pmap = PixelMap::for_camera(&intr);
    let params = HoughParams::default();
    let cam = common::identity_camera();
    let px = pmap.pixel_mm(&intr);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (markers, ideal) = common::random_marker_scene(&mut rng, &intr, &pmap, MARKER_RADII, 0.0635);
        let (l, r) = render_stereo(&markers, &cam, &intr, &pmap).unwrap();
        let seen = extract_feature_vector(&l, &r, &params, &pmap, &intr).unwrap();
        let worst = (seen.0 - ideal.0).amax() / px;
        assert!(worst < 2.0, "{worst:.3} px between {:?} and {:?}", seen.0, ideal.0);
    }
}
