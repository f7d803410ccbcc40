//! Open-loop reference path: inverse kinematics of the target followed by a
//! proper approximation of the inner-loop inverse.

use crate::error::{Error, Result};
use crate::kinematics::JointAngles;
use crate::lti::{lag_power, poly_mul, RationalSiso, StateSpaceBlock};

/// `(tau s + 1)^3 / ((3 tau s + 1)(tau_f s + 1)^2)` with `tau_f = 0.1 tau`.
pub fn forward_filter(tau_in: f64) -> Result<RationalSiso> {
    if !(tau_in > 0.0) {
        return Err(Error::Config(format!("tau_in must be positive, got {tau_in}")));
    }
    let tau_f = 0.1 * tau_in;
    RationalSiso::new(lag_power(tau_in, 3), poly_mul(&[1.0, 3.0 * tau_in], &lag_power(tau_f, 2)))
}

#[derive(Debug, Clone)]
pub struct FeedforwardBlock {
    pub q_ff_target: JointAngles,
    pub tau_forward: f64,
    blocks: Vec<StateSpaceBlock>,
}

impl FeedforwardBlock {
    /// Filter at rest on `q_start`, driven toward `q_ff_target`.
    pub fn new(tau_in: f64, q_start: &JointAngles, q_ff_target: JointAngles) -> Result<Self> {
        let proto = forward_filter(tau_in)?.realize();
        let mut blocks = vec![proto; 6];
        for (blk, q) in blocks.iter_mut().zip(q_start.iter()) {
            blk.set_steady_state(*q)?;
        }
        Ok(Self { q_ff_target, tau_forward: 0.1 * tau_in, blocks })
    }

    /// Current reference, before advancing.
    pub fn output(&self) -> JointAngles {
        JointAngles::from_iterator(self.blocks.iter().zip(self.q_ff_target.iter()).map(|(b, u)| b.output(*u)))
    }

    /// Returns the reference for this step, then advances the filter by `dt`.
    pub fn step(&mut self, dt: f64) -> Result<JointAngles> {
        let out = self.output();
        for (blk, u) in self.blocks.iter_mut().zip(self.q_ff_target.iter()) {
            blk.step(*u, dt)?;
        }
        Ok(out)
    }
}
