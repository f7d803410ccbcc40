//! On-disk artifacts: trajectory and sweep CSV, JSON metrics and manifests,
//! binary PGM images.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::outer::LoopCheckRow;
use crate::error::{Error, Result};
use crate::sim::{Metrics, ScenarioConfig, SweepRow, TrajectoryLog};
use crate::stereo::FeatureVector;
use crate::vision::{CircleHypothesis, GrayImage};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const CIRCLES_FILE: &str = "circles.json";
pub const FEATURES_FILE: &str = "features.json";
pub const LIN_CHECK_FILE: &str = "lin_check.csv";

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn trajectory_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["qref", "qT", "qTbar"] {
        h.extend((1..=6).map(|i| format!("{prefix}{i}")));
    }
    h.extend(["x", "y", "z"].map(String::from));
    for prefix in ["n", "s", "a"] {
        h.extend((1..=3).map(|i| format!("{prefix}{i}")));
    }
    h.extend(["ul1", "ur1", "v1", "ul2", "ur2", "v2", "mode", "active_channels"].map(String::from));
    h
}

/// Trajectory table, one row per control sample; feature columns hold the
/// features fed to the controller.
pub fn trajectory_csv(log: &TrajectoryLog) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header()).map_err(csv_error)?;
    for r in &log.rows {
        let mut rec = vec![num(r.t)];
        for q in [&r.q_ref, &r.q_t, &r.q_tbar] {
            rec.extend(q.iter().map(|v| num(*v)));
        }
        rec.extend(r.position().iter().map(|v| num(*v)));
        let rot = r.pose.rotation();
        for c in 0..3 {
            rec.extend(rot.column(c).iter().map(|v| num(*v)));
        }
        rec.extend(r.used.0.iter().map(|v| num(*v)));
        rec.push(r.mode.as_str().to_string());
        rec.push(r.active_channels.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    finish_csv(w)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "fraction", "error_pct", "steady_state_x_error", "settling_time", "failure"])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.param.as_str().to_string(),
            format!("{:.4}", r.fraction),
            opt_num(r.error_pct),
            opt_num(r.steady_state_x_error),
            opt_num(r.settling_time),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

pub fn lin_check_csv(rows: &[LoopCheckRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "omega",
        "target_re",
        "target_im",
        "achieved_re",
        "achieved_im",
        "target_mag",
        "achieved_mag",
        "rel_error",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            num(r.omega),
            num(r.target.re),
            num(r.target.im),
            num(r.achieved.re),
            num(r.achieved.im),
            num(r.target.norm()),
            num(r.achieved.norm()),
            num(r.rel_error),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

fn pretty_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn metrics_json(m: &Metrics) -> Result<Vec<u8>> {
    pretty_json(m)
}

/// Hex SHA-256 of the compact JSON form of `cfg`.
pub fn config_digest(cfg: &ScenarioConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

/// Record of one `run`: the config as resolved (defaults expanded), the
/// artifact file names and a digest of the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub config_digest: String,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, artifacts: &[&str]) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            config_digest: config_digest(cfg)?,
            artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        pretty_json(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureRecord {
    pub ul1: f64,
    pub ur1: f64,
    pub v1: f64,
    pub ul2: f64,
    pub ur2: f64,
    pub v2: f64,
}

impl From<&FeatureVector> for FeatureRecord {
    fn from(f: &FeatureVector) -> Self {
        let v = &f.0;
        Self { ul1: v[0], ur1: v[1], v1: v[2], ul2: v[3], ur2: v[4], v2: v[5] }
    }
}

#[derive(Serialize)]
struct CircleFile<'a> {
    left: &'a [CircleHypothesis],
    right: &'a [CircleHypothesis],
}

pub fn circles_json(left: &[CircleHypothesis], right: &[CircleHypothesis]) -> Result<Vec<u8>> {
    pretty_json(&CircleFile { left, right })
}

pub fn features_json(f: &FeatureVector) -> Result<Vec<u8>> {
    pretty_json(&FeatureRecord::from(f))
}

/// Creates parent directories as needed.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Writes the trajectory, metrics and manifest of one run into `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, log: &TrajectoryLog, metrics: &Metrics) -> Result<RunManifest> {
    write_file(&dir.join(TRAJECTORY_FILE), &trajectory_csv(log)?)?;
    write_file(&dir.join(METRICS_FILE), &metrics_json(metrics)?)?;
    let manifest = RunManifest::new(cfg, &[TRAJECTORY_FILE, METRICS_FILE, MANIFEST_FILE])?;
    write_file(&dir.join(MANIFEST_FILE), &manifest.to_json()?)?;
    Ok(manifest)
}

/// Binary 8-bit PGM; intensities are quantized to `round(255 v)`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// Reads a binary PGM with maxval 255. Header comments are allowed.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = |msg: &str| Error::ImageFormat(msg.to_string());
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad {what} {s:?}")));
    let (w, h, maxval) = (parse(fields[1], "width")?, parse(fields[2], "height")?, parse(fields[3], "maxval")?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing raster separator"));
    }
    let raster = &bytes[pos + 1..];
    let n = w.checked_mul(h).ok_or_else(|| bad("image too large"))?;
    if raster.len() != n {
        return Err(bad(&format!("expected {n} raster bytes, found {}", raster.len())));
    }
    GrayImage::from_pixels(w, h, raster.iter().map(|&b| b as f32 / 255.0).collect())
        .map_err(|e| Error::ImageFormat(e.to_string()))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_file(path, &encode_pgm(img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::builtin_scenario;

    #[test]
    fn header_has_46_columns_in_order() {
        let h = trajectory_header();
        assert_eq!(h.len(), 1 + 18 + 3 + 9 + 6 + 2);
        assert_eq!(h[0], "t");
        assert_eq!(h[1], "qref1");
        assert_eq!(h[13], "qTbar1");
        assert_eq!(&h[19..22], ["x", "y", "z"]);
        assert_eq!(h[22], "n1");
        assert_eq!(h[31], "ul1");
        assert_eq!(h[h.len() - 1], "active_channels");
    }

    #[test]
    fn number_format_keeps_nine_digits() {
        assert_eq!(num(1.0), "1.00000000e0");
        assert_eq!(num(-0.123456789123), "-1.23456789e-1");
        let back: f64 = num(std::f64::consts::PI).parse().unwrap();
        assert!((back - std::f64::consts::PI).abs() < 5e-9);
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let (w, h) = (23, 17);
        let px: Vec<f32> = (0..w * h).map(|i| ((i * 37) % 256) as f32 / 255.0).collect();
        let img = GrayImage::from_pixels(w, h, px).unwrap();
        let bytes = encode_pgm(&img);
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_pgm(&back), bytes);
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let mut bytes = b"P5 # made by hand\n# another\n16 16\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(128u8, 256));
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (16, 16));
        assert!(matches!(decode_pgm(b"P2\n16 16\n255\n"), Err(Error::ImageFormat(_))));
        assert!(matches!(decode_pgm(&bytes[..bytes.len() - 1]), Err(Error::ImageFormat(_))));
        assert!(matches!(decode_pgm(b"P5\n16 16\n65535\n"), Err(Error::ImageFormat(_))));
    }

    #[test]
    fn digest_tracks_config_content() {
        let a = builtin_scenario(1).unwrap();
        let mut b = a.clone();
        assert_eq!(config_digest(&a).unwrap(), config_digest(&b).unwrap());
        b.timing.horizon = 1.5;
        assert_ne!(config_digest(&a).unwrap(), config_digest(&b).unwrap());
        assert_eq!(config_digest(&a).unwrap().len(), 64);
    }
}
