//! Synthetic stereo rendering of the two circular markers and circle-center
//! recovery with a Hough accumulator.

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stereo::{in_view, project, world_to_camera, CameraIntrinsics, CameraPose, FeatureVector, ImagePoint};

/// Row-major intensity image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub const MIN_SIDE: usize = 16;

    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::from_pixels(width, height, vec![0.0; width * height])
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width < Self::MIN_SIDE || height < Self::MIN_SIDE {
            return Err(Error::ImageFormat(format!(
                "image must be at least {0}x{0}, got {width}x{height}",
                Self::MIN_SIDE
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::ImageFormat(format!("expected {} pixels, got {}", width * height, pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.pixels[y * self.width + x] = v;
    }
}

/// Metric image-plane coordinates to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMap {
    pub f_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl PixelMap {
    /// A 1280x720 sensor whose horizontal extent spans the camera's view angle.
    pub fn for_camera(intr: &CameraIntrinsics) -> Self {
        let (width, height) = (1280, 720);
        Self {
            f_px: (width as f64 / 2.0) / (intr.fov_w_deg.to_radians() / 2.0).tan(),
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn to_pixel(&self, intr: &CameraIntrinsics, u_mm: f64, v_mm: f64) -> (f64, f64) {
        (self.cx + u_mm / intr.f_u * self.f_px, self.cy + v_mm / intr.f_v * self.f_px)
    }

    pub fn to_metric(&self, intr: &CameraIntrinsics, x: f64, y: f64) -> (f64, f64) {
        ((x - self.cx) / self.f_px * intr.f_u, (y - self.cy) / self.f_px * intr.f_v)
    }

    /// Size of one pixel on the image plane, mm.
    pub fn pixel_mm(&self, intr: &CameraIntrinsics) -> f64 {
        intr.f_u / self.f_px
    }
}

/// A circular marker in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub position: Vector3<f64>,
    /// Physical radius, m.
    pub radius: f64,
}

/// Default marker radii: flange (marker 1) and mid-tool (marker 2), m.
pub const MARKER_RADII: [f64; 2] = [0.012, 0.008];

/// Adds an anti-aliased ring of about 1.5 px stroke width.
pub fn draw_ring(img: &mut GrayImage, cx: f64, cy: f64, r: f64) {
    let reach = r + 2.0;
    let x0 = (cx - reach).floor().max(0.0) as usize;
    let y0 = (cy - reach).floor().max(0.0) as usize;
    let x1 = ((cx + reach).ceil().max(0.0) as usize).min(img.width.saturating_sub(1));
    let y1 = ((cy + reach).ceil().max(0.0) as usize).min(img.height.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            let v = (1.25 - (d - r).abs()).clamp(0.0, 1.0) as f32;
            if v > img.get(x, y) {
                img.set(x, y, v);
            }
        }
    }
}

/// Left and right camera images of `markers`.
pub fn render_stereo(
    markers: &[Marker],
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    pmap: &PixelMap,
) -> Result<(GrayImage, GrayImage)> {
    let mut left = GrayImage::new(pmap.width, pmap.height)?;
    let mut right = GrayImage::new(pmap.width, pmap.height)?;
    for (index, m) in markers.iter().enumerate() {
        let pc = world_to_camera(pose, &m.position);
        if !in_view(intr, &pc) {
            return Err(Error::MarkerOutOfView { index: index + 1 });
        }
        let ip = project(intr, &pc)?;
        let r_px = pmap.f_px * m.radius / pc.z;
        let (xl, y) = pmap.to_pixel(intr, ip.ul, ip.v);
        let (xr, _) = pmap.to_pixel(intr, ip.ur, ip.v);
        draw_ring(&mut left, xl, y, r_px);
        draw_ring(&mut right, xr, y, r_px);
    }
    Ok((left, right))
}

/// Pixels at or above `threshold`, row-major.
pub fn edge_pixels(img: &GrayImage, threshold: f32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..img.height {
        for x in 0..img.width {
            if img.get(x, y) >= threshold {
                out.push((x, y));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleHypothesis {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub votes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    pub r_min: usize,
    pub r_max: usize,
    /// Absolute vote floor.
    pub min_votes: u32,
    /// Peaks must also collect this fraction of the rasterized circle.
    pub min_vote_fraction: f64,
    pub edge_threshold: f32,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self { r_min: 3, r_max: 40, min_votes: 12, min_vote_fraction: 0.5, edge_threshold: 0.5 }
    }
}

const NMS_CENTER_PX: f64 = 5.0;
const NMS_RADIUS_PX: f64 = 2.0;

/// Integer offsets of a midpoint-rasterized circle, sorted and unique.
pub fn circle_offsets(r: usize) -> Vec<(i64, i64)> {
    let r = r as i64;
    let mut pts = Vec::with_capacity((8 * r + 8) as usize);
    let (mut x, mut y, mut err) = (r, 0i64, 1 - r);
    while x >= y {
        for (dx, dy) in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)] {
            pts.push((dx, dy));
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Circle detection by voting in `(a, b, R)`.
pub fn hough_circles(
    edges: &[(usize, usize)],
    width: usize,
    height: usize,
    params: &HoughParams,
) -> Result<Vec<CircleHypothesis>> {
    if params.r_min < 3 || params.r_max < params.r_min || params.r_max > width.min(height) / 2 {
        return Err(Error::Config(format!(
            "Hough radius range [{}, {}] invalid for a {width}x{height} image",
            params.r_min, params.r_max
        )));
    }
    if edges.is_empty() {
        return Ok(Vec::new());
    }
    // accumulator window: edge bounding box grown by r_max, clipped to the image
    let pad = params.r_max;
    let ex0 = edges.iter().map(|e| e.0).min().unwrap_or(0);
    let ex1 = edges.iter().map(|e| e.0).max().unwrap_or(0);
    let ey0 = edges.iter().map(|e| e.1).min().unwrap_or(0);
    let ey1 = edges.iter().map(|e| e.1).max().unwrap_or(0);
    let x0 = ex0.saturating_sub(pad);
    let y0 = ey0.saturating_sub(pad);
    let x1 = (ex1 + pad).min(width - 1);
    let y1 = (ey1 + pad).min(height - 1);
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);

    let radii: Vec<usize> = (params.r_min..=params.r_max).collect();
    let mut accs: Vec<Vec<u32>> = Vec::with_capacity(radii.len());
    let mut raster_len = Vec::with_capacity(radii.len());
    for &r in &radii {
        let offs = circle_offsets(r);
        raster_len.push(offs.len());
        let mut acc = vec![0u32; w * h];
        for &(ex, ey) in edges {
            for &(dx, dy) in &offs {
                let a = ex as i64 + dx - x0 as i64;
                let b = ey as i64 + dy - y0 as i64;
                if a >= 0 && b >= 0 && (a as usize) < w && (b as usize) < h {
                    acc[b as usize * w + a as usize] += 1;
                }
            }
        }
        accs.push(acc);
    }

    let mut peaks = Vec::new();
    for (ri, acc) in accs.iter().enumerate() {
        let threshold = params.min_votes.max((params.min_vote_fraction * raster_len[ri] as f64).ceil() as u32);
        for b in 0..h {
            for a in 0..w {
                let v = acc[b * w + a];
                if v < threshold || !is_local_max(acc, w, h, a, b) {
                    continue;
                }
                peaks.push((v, ri, a, b));
            }
        }
    }
    peaks.sort_by(|p, q| q.0.cmp(&p.0).then(p.1.cmp(&q.1)).then(p.3.cmp(&q.3)).then(p.2.cmp(&q.2)));

    let mut out: Vec<CircleHypothesis> = Vec::new();
    for (votes, ri, a, b) in peaks {
        let (fa, fb) = refine_center(&accs[ri], w, h, a, b);
        let r = refine_radius(&accs, ri, w, a, b) + radii[0] as f64;
        let hyp = CircleHypothesis { a: fa + x0 as f64, b: fb + y0 as f64, r, votes };
        let suppressed = out
            .iter()
            .any(|k| (k.a - hyp.a).hypot(k.b - hyp.b) <= NMS_CENTER_PX && (k.r - hyp.r).abs() <= NMS_RADIUS_PX);
        if !suppressed {
            out.push(hyp);
        }
    }
    Ok(out)
}

/// Plateau ties go to the first cell in row-major order.
fn is_local_max(acc: &[u32], w: usize, h: usize, a: usize, b: usize) -> bool {
    let v = acc[b * w + a];
    for db in -1i64..=1 {
        for da in -1i64..=1 {
            if da == 0 && db == 0 {
                continue;
            }
            let (na, nb) = (a as i64 + da, b as i64 + db);
            if na < 0 || nb < 0 || na as usize >= w || nb as usize >= h {
                continue;
            }
            let n = acc[nb as usize * w + na as usize];
            let earlier = db < 0 || (db == 0 && da < 0);
            if n > v || (earlier && n == v) {
                return false;
            }
        }
    }
    true
}

fn refine_center(acc: &[u32], w: usize, h: usize, a: usize, b: usize) -> (f64, f64) {
    let (mut sw, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for nb in b.saturating_sub(1)..=(b + 1).min(h - 1) {
        for na in a.saturating_sub(1)..=(a + 1).min(w - 1) {
            let v = acc[nb * w + na] as f64;
            sw += v;
            sa += v * na as f64;
            sb += v * nb as f64;
        }
    }
    (sa / sw, sb / sw)
}

/// Radius index with a parabolic fit across neighbouring radii.
fn refine_radius(accs: &[Vec<u32>], ri: usize, w: usize, a: usize, b: usize) -> f64 {
    let at = |i: usize| accs[i][b * w + a] as f64;
    if ri == 0 || ri + 1 >= accs.len() {
        return ri as f64;
    }
    let (l, c, r) = (at(ri - 1), at(ri), at(ri + 1));
    let denom = l - 2.0 * c + r;
    if denom < 0.0 {
        ri as f64 + (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        ri as f64
    }
}

/// Maximum vertical mismatch for a left/right pair, px.
pub const EPIPOLAR_TOL_PX: f64 = 3.0;

/// Marker image coordinates from a stereo pair.
pub fn extract_feature_vector(
    left: &GrayImage,
    right: &GrayImage,
    params: &HoughParams,
    pmap: &PixelMap,
    intr: &CameraIntrinsics,
) -> Result<FeatureVector> {
    let detect = |img: &GrayImage, side: &str| -> Result<Vec<CircleHypothesis>> {
        let mut c = hough_circles(&edge_pixels(img, params.edge_threshold), img.width, img.height, params)?;
        if c.len() != 2 {
            return Err(Error::FeatureLoss(format!("{} circles found in the {side} image", c.len())));
        }
        c.sort_by(|p, q| q.r.total_cmp(&p.r));
        Ok(c)
    };
    let l = detect(left, "left")?;
    let r = detect(right, "right")?;
    let pairs_ok =
        |r0: usize, r1: usize| (l[0].b - r[r0].b).abs() < EPIPOLAR_TOL_PX && (l[1].b - r[r1].b).abs() < EPIPOLAR_TOL_PX;
    let (first, second) = if pairs_ok(0, 1) {
        ((l[0], r[0]), (l[1], r[1]))
    } else if pairs_ok(1, 0) {
        ((l[0], r[1]), (l[1], r[0]))
    } else {
        return Err(Error::FeatureLoss("epipolar pairing failed".into()));
    };
    let mut pairs = [first, second];
    // larger projected radius first
    if pairs[1].0.r + pairs[1].1.r > pairs[0].0.r + pairs[0].1.r {
        pairs.swap(0, 1);
    }
    let mut pts = [ImagePoint { ul: 0.0, ur: 0.0, v: 0.0 }; 2];
    for (i, (cl, cr)) in pairs.iter().enumerate() {
        let (ul, vl) = pmap.to_metric(intr, cl.a, cl.b);
        let (ur, vr) = pmap.to_metric(intr, cr.a, cr.b);
        pts[i] = ImagePoint { ul, ur, v: 0.5 * (vl + vr) };
        if !(pts[i].disparity() > 0.0) {
            return Err(Error::FeatureLoss(format!(
                "marker {} has non-positive disparity {:.4e} mm",
                i + 1,
                pts[i].disparity()
            )));
        }
    }
    Ok(FeatureVector::from_points(pts[0], pts[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::HomTransform;

    fn ring_image(w: usize, h: usize, rings: &[(f64, f64, f64)]) -> GrayImage {
        let mut img = GrayImage::new(w, h).unwrap();
        for &(a, b, r) in rings {
            draw_ring(&mut img, a, b, r);
        }
        img
    }

    #[test]
    fn pixel_map_defaults() {
        let pm = PixelMap::for_camera(&CameraIntrinsics::default());
        assert!((pm.f_px - 685.24).abs() < 0.05);
        assert_eq!((pm.cx, pm.cy), (640.0, 360.0));
    }

    #[test]
    fn on_axis_marker_render_geometry() {
        let intr = CameraIntrinsics::default();
        let pm = PixelMap::for_camera(&intr);
        let pose = CameraPose::new(HomTransform::identity()).unwrap();
        let m = Marker { position: Vector3::new(0.0, 0.0, 1.0), radius: 0.01 };
        let (l, r) = render_stereo(&[m], &pose, &intr, &pm).unwrap();
        let half = pm.f_px * intr.baseline / 2.0;
        let hp = HoughParams { r_min: 4, r_max: 12, ..Default::default() };
        let cl = hough_circles(&edge_pixels(&l, 0.5), l.width(), l.height(), &hp).unwrap();
        let cr = hough_circles(&edge_pixels(&r, 0.5), r.width(), r.height(), &hp).unwrap();
        assert_eq!(cl.len(), 1);
        assert!((cl[0].a - (640.0 - half)).abs() <= 1.0 && (cl[0].b - 360.0).abs() <= 1.0);
        assert!((cr[0].a - (640.0 + half)).abs() <= 1.0);
        assert!((cl[0].r - 6.86).abs() <= 1.0);
    }

    #[test]
    fn out_of_view_marker_named() {
        let intr = CameraIntrinsics::default();
        let pm = PixelMap::for_camera(&intr);
        let pose = CameraPose::new(HomTransform::identity()).unwrap();
        let ms = [
            Marker { position: Vector3::new(0.0, 0.0, 1.0), radius: 0.01 },
            Marker { position: Vector3::new(0.0, 0.0, -1.0), radius: 0.01 },
        ];
        assert!(matches!(render_stereo(&ms, &pose, &intr, &pm), Err(Error::MarkerOutOfView { index: 2 })));
        let (l, _) = render_stereo(&[], &pose, &intr, &pm).unwrap();
        assert!(l.pixels().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn edge_counts() {
        let empty = GrayImage::new(32, 32).unwrap();
        assert!(edge_pixels(&empty, 0.5).is_empty());
        let mut one = empty.clone();
        one.set(3, 4, 1.0);
        assert_eq!(edge_pixels(&one, 0.5), vec![(3, 4)]);
        let ring = ring_image(128, 128, &[(64.0, 64.0, 20.0)]);
        let n = edge_pixels(&ring, 0.5).len() as f64;
        let per = 2.0 * std::f64::consts::PI * 20.0;
        assert!(n >= 0.8 * per && n <= 2.5 * per, "{n}");
    }

    #[test]
    fn single_ring_found() {
        let img = ring_image(128, 128, &[(50.0, 60.0, 20.0)]);
        let hp = HoughParams { r_min: 5, r_max: 30, ..Default::default() };
        let c = hough_circles(&edge_pixels(&img, 0.5), 128, 128, &hp).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].a - 50.0).abs() <= 1.0 && (c[0].b - 60.0).abs() <= 1.0 && (c[0].r - 20.0).abs() <= 1.0);
    }

    #[test]
    fn two_rings_found() {
        let img = ring_image(128, 128, &[(30.0, 30.0, 12.0), (90.0, 85.0, 18.0)]);
        let hp = HoughParams { r_min: 5, r_max: 30, ..Default::default() };
        let c = hough_circles(&edge_pixels(&img, 0.5), 128, 128, &hp).unwrap();
        assert_eq!(c.len(), 2);
        for (a, b) in [(30.0, 30.0), (90.0, 85.0)] {
            assert!(c.iter().any(|h| (h.a - a).abs() <= 1.0 && (h.b - b).abs() <= 1.0));
        }
    }

    #[test]
    fn bad_radius_range_rejected() {
        let hp = HoughParams { r_min: 2, ..Default::default() };
        assert!(hough_circles(&[(1, 1)], 128, 128, &hp).is_err());
        let hp = HoughParams { r_max: 65, ..Default::default() };
        assert!(hough_circles(&[(1, 1)], 128, 128, &hp).is_err());
        assert!(hough_circles(&[], 128, 128, &HoughParams::default()).unwrap().is_empty());
    }

    #[test]
    fn offsets_are_on_circle() {
        for r in [3usize, 8, 20] {
            for (dx, dy) in circle_offsets(r) {
                let d = ((dx * dx + dy * dy) as f64).sqrt();
                assert!((d - r as f64).abs() < 0.75);
            }
        }
    }
}
