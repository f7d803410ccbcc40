//! Step-response figures extracted from a trajectory log.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::Mode;
use crate::kinematics::HomTransform;
use crate::sim::TrajectoryLog;

/// Settling band as a fraction of the initial position-error norm.
pub const SETTLING_BAND: f64 = 0.02;
/// Trailing fraction of the horizon averaged for steady-state error.
pub const STEADY_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// First time after which the position-error norm stays inside the band;
    /// `None` when it never does.
    pub settling_time: Option<f64>,
    /// Mean `|x_i - x_target_i|` over the trailing window, m.
    pub steady_state_error: [f64; 3],
    /// Largest excursion past the target per axis, % of the initial error norm.
    pub overshoot: [f64; 3],
    pub time_in_estimated_mode: f64,
    /// Largest rotation angle between the actual and target orientation, rad.
    pub max_orientation_error: f64,
    pub mode_transitions: usize,
    pub initial_mode: String,
    pub final_mode: String,
}

/// Rotation angle of `R_a^T R_b`.
pub fn orientation_error(a: &HomTransform, b: &HomTransform) -> f64 {
    let r = a.rotation().transpose() * b.rotation();
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn compute_metrics(log: &TrajectoryLog, target: &HomTransform) -> Metrics {
    let rows = &log.rows;
    assert!(!rows.is_empty(), "metrics need at least one sample");
    let goal = target.translation();
    let err = |p: &Vector3<f64>| p - goal;
    let e0 = err(&rows[0].position());
    let e0n = e0.norm();

    let band = SETTLING_BAND * e0n;
    let settling_time = if e0n == 0.0 {
        Some(rows[0].t)
    } else {
        let last_outside = rows.iter().rposition(|r| err(&r.position()).norm() >= band);
        match last_outside {
            None => Some(rows[0].t),
            Some(i) if i + 1 < rows.len() => Some(rows[i + 1].t),
            Some(_) => None,
        }
    };

    let t_end = rows[rows.len() - 1].t;
    let t0 = rows[0].t;
    let window_start = t_end - STEADY_WINDOW * (t_end - t0);
    let tail: Vec<_> = rows.iter().filter(|r| r.t >= window_start - 1e-12).collect();
    let mut steady_state_error = [0.0; 3];
    for (i, s) in steady_state_error.iter_mut().enumerate() {
        *s = tail.iter().map(|r| err(&r.position())[i].abs()).sum::<f64>() / tail.len() as f64;
    }

    let mut overshoot = [0.0; 3];
    if e0n > 0.0 {
        for (i, o) in overshoot.iter_mut().enumerate() {
            let side = e0[i].signum();
            let worst = rows
                .iter()
                .map(|r| {
                    let e = err(&r.position())[i];
                    if e0[i] == 0.0 {
                        e.abs()
                    } else {
                        (-side * e).max(0.0)
                    }
                })
                .fold(0.0, f64::max);
            *o = 100.0 * worst / e0n;
        }
    }

    let estimated = rows.iter().filter(|r| r.mode == Mode::Estimated).count();
    let mode_transitions = rows.windows(2).filter(|w| w[0].mode != w[1].mode).count();
    let max_orientation_error = rows.iter().map(|r| orientation_error(target, &r.pose)).fold(0.0, f64::max);

    Metrics {
        settling_time,
        steady_state_error,
        overshoot,
        time_in_estimated_mode: estimated as f64 * log.dt_ctrl,
        max_orientation_error,
        mode_transitions,
        initial_mode: rows[0].mode.as_str().to_string(),
        final_mode: rows[rows.len() - 1].mode.as_str().to_string(),
    }
}
