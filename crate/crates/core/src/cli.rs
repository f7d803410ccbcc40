//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numeric abort, 4 I/O error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{tool_points_base, JointAngles};
use crate::servo::ServoPlant;
use crate::sim::{self, builtin_scenario, builtin_scenarios, ScenarioConfig, SweepParam};
use crate::vision::{edge_pixels, extract_feature_vector, hough_circles, render_stereo, Marker};

#[derive(Debug, Parser)]
#[command(name = "ibvs", version, about = "Stereo visual servoing workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write trajectory.csv, metrics.json and manifest.json.
    Run {
        /// Built-in scenario number (1, 2, 3) or path to a JSON config.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Scale one true link length against the nominal model and write sweep.csv.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, default_value_t = 0.5)]
        from: f64,
        #[arg(long, default_value_t = 1.1)]
        to: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Base scenario (number or JSON path).
        #[arg(long, default_value = "1")]
        scenario: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Detect both markers in a stereo PGM pair and write circles.json and features.json.
    HoughDemo {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Render the pair first from these six joint angles (degrees, comma separated).
        #[arg(long, value_name = "Q1,..,Q6", allow_hyphen_values = true)]
        render_from_pose: Option<String>,
        /// Scenario supplying camera and vision settings.
        #[arg(long, default_value = "1")]
        scenario: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare the frozen linearized loop with the Butterworth target.
    LinCheck {
        #[arg(long)]
        scenario: String,
        /// Frequencies in rad/s, comma separated.
        #[arg(long, default_value = "0.1,1,10,30")]
        omega: String,
        /// Also write lin_check.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Scenarios {
        /// Dump the full configs as a JSON array.
        #[arg(long)]
        print: bool,
        /// Write scenario-N.json files into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// A built-in scenario number or a JSON config path.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    if let Ok(id) = arg.parse::<usize>() {
        return builtin_scenario(id)
            .ok_or_else(|| Error::Config(format!("no built-in scenario {id} (expected 1..=3)")));
    }
    ScenarioConfig::from_json(&fs::read_to_string(arg)?)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, out } => cmd_run(&scenario, &out),
        Command::Sweep { param, from, to, step, scenario, out } => cmd_sweep(param, from, to, step, &scenario, &out),
        Command::HoughDemo { left, right, render_from_pose, scenario, out } => {
            cmd_hough(&left, &right, render_from_pose.as_deref(), &scenario, &out)
        }
        Command::LinCheck { scenario, omega, out } => cmd_lin_check(&scenario, &omega, out.as_deref()),
        Command::Scenarios { print, out } => cmd_scenarios(print, out.as_deref()),
    }
}

fn cmd_run(scenario: &str, out: &Path) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let (log, m) = sim::run_scenario(&cfg)?;
    let manifest = io::write_run(out, &cfg, &log, &m)?;
    println!("{}: {} samples", cfg.name, log.rows.len());
    match m.settling_time {
        Some(t) => println!("settling_time {t:.4} s"),
        None => println!("settling_time - (not settled)"),
    }
    let [ex, ey, ez] = m.steady_state_error;
    println!("steady_state_error {ex:.3e} {ey:.3e} {ez:.3e} m");
    println!("modes {} -> {} ({} transitions)", m.initial_mode, m.final_mode, m.mode_transitions);
    println!("config_digest {}", manifest.config_digest);
    Ok(())
}

fn cmd_sweep(param: SweepParam, from: f64, to: f64, step: f64, scenario: &str, out: &Path) -> Result<()> {
    let base = load_scenario(scenario)?;
    let fractions = sim::sweep_fractions(from, to, step)?;
    let rows = sim::robustness_sweep(&base, param, &fractions);
    io::write_file(&out.join(io::SWEEP_FILE), &io::sweep_csv(&rows)?)?;
    for r in &rows {
        match (&r.error_pct, &r.failure) {
            (Some(e), _) => println!("{} {:.2} {:.3e} %", param.as_str(), r.fraction, e),
            (None, Some(f)) => println!("{} {:.2} failed: {f}", param.as_str(), r.fraction),
            (None, None) => unreachable!("sweep row carries neither result nor failure"),
        }
    }
    Ok(())
}

fn cmd_hough(left: &Path, right: &Path, pose: Option<&str>, scenario: &str, out: &Path) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let sc = cfg.resolve()?;
    let pmap = cfg.vision.pixel_map(&sc.intrinsics);
    if let Some(text) = pose {
        let deg = parse_list(text, "joint angle")?;
        if deg.len() != 6 {
            return Err(Error::Config(format!("--render-from-pose needs 6 angles, got {}", deg.len())));
        }
        let q = JointAngles::from_iterator(deg.iter().map(|d| d.to_radians()));
        let plant = ServoPlant { geometry: sc.true_geometry, intrinsics: sc.intrinsics, camera: sc.camera };
        let (p1, p2) = tool_points_base(&plant.geometry, &q);
        let markers = [
            Marker { position: p1, radius: cfg.vision.marker_radii[0] },
            Marker { position: p2, radius: cfg.vision.marker_radii[1] },
        ];
        let (l, r) = render_stereo(&markers, &plant.camera, &sc.intrinsics, &pmap)?;
        io::write_pgm(left, &l)?;
        io::write_pgm(right, &r)?;
    }
    let l = io::read_pgm(left)?;
    let r = io::read_pgm(right)?;
    let params = cfg.vision.hough.params();
    let detect = |img: &crate::vision::GrayImage| {
        hough_circles(&edge_pixels(img, params.edge_threshold), img.width(), img.height(), &params)
    };
    let (cl, cr) = (detect(&l)?, detect(&r)?);
    io::write_file(&out.join(io::CIRCLES_FILE), &io::circles_json(&cl, &cr)?)?;
    println!("circles: {} left, {} right", cl.len(), cr.len());
    let f = extract_feature_vector(&l, &r, &params, &pmap, &sc.intrinsics)?;
    io::write_file(&out.join(io::FEATURES_FILE), &io::features_json(&f)?)?;
    let v = &f.0;
    println!(
        "features (mm): ul1 {:.4} ur1 {:.4} v1 {:.4} ul2 {:.4} ur2 {:.4} v2 {:.4}",
        v[0], v[1], v[2], v[3], v[4], v[5]
    );
    Ok(())
}

fn cmd_lin_check(scenario: &str, omega: &str, out: Option<&Path>) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let omegas = parse_list(omega, "omega")?;
    if omegas.iter().any(|w| *w <= 0.0) {
        return Err(Error::Config("frequencies must be positive".into()));
    }
    let rows = sim::lin_check(&cfg, &omegas)?;
    let table = io::lin_check_csv(&rows)?;
    if let Some(dir) = out {
        io::write_file(&dir.join(io::LIN_CHECK_FILE), &table)?;
    }
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}

fn cmd_scenarios(print: bool, out: Option<&Path>) -> Result<()> {
    let all = builtin_scenarios();
    if let Some(dir) = out {
        for (i, cfg) in all.iter().enumerate() {
            io::write_file(&dir.join(format!("scenario-{}.json", i + 1)), format!("{}\n", cfg.to_json()).as_bytes())?;
        }
    }
    if print {
        println!("{}", serde_json::to_string_pretty(&all)?);
    } else {
        for (i, cfg) in all.iter().enumerate() {
            println!("{} {}", i + 1, cfg.name);
        }
    }
    Ok(())
}
