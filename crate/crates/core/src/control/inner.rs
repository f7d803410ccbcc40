//! Per-joint inner loop: the feedback-linearized double integrator closed by
//! a Youla-designed controller.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kinematics::JointAngles;
use crate::lti::{close_loop, lag_power, RationalSiso, StateSpaceBlock};

/// Which joint-controller numerator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerControllerVariant {
    /// `(3 tau s + 1) / (tau^3 s + 3 tau^2)`; closes the double integrator
    /// into `(3 tau s + 1) / (tau s + 1)^3`.
    #[default]
    Corrected,
    /// `(3 tau^2 s + 1) / (tau^3 s + 3 tau^2)`, kept for comparison. The loop
    /// it produces is unstable for small `tau`.
    Printed,
}

/// How the six joint loops are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerRealization {
    /// The closed-loop transfer function directly.
    #[default]
    ClosedForm,
    /// Controller and `1/s^2` plant in feedback.
    DoubleIntegrator(InnerControllerVariant),
}

pub fn design_inner_controller(tau_in: f64, variant: InnerControllerVariant) -> Result<RationalSiso> {
    if !(tau_in > 0.0) {
        return Err(Error::Config(format!("tau_in must be positive, got {tau_in}")));
    }
    let lead = match variant {
        InnerControllerVariant::Corrected => 3.0 * tau_in,
        InnerControllerVariant::Printed => 3.0 * tau_in * tau_in,
    };
    RationalSiso::new(vec![1.0, lead], vec![3.0 * tau_in * tau_in, tau_in.powi(3)])
}

/// `ddq = v`.
pub fn double_integrator() -> RationalSiso {
    RationalSiso::new(vec![1.0], vec![0.0, 0.0, 1.0]).expect("1/s^2 is proper")
}

/// `(3 tau s + 1) / (tau s + 1)^3`.
pub fn inner_closed_loop(tau_in: f64) -> RationalSiso {
    RationalSiso::new(vec![1.0, 3.0 * tau_in], lag_power(tau_in, 3)).expect("proper")
}

/// One joint's closed loop from reference to angle.
pub fn realize_joint_loop(tau_in: f64, realization: InnerRealization) -> Result<StateSpaceBlock> {
    match realization {
        InnerRealization::ClosedForm => {
            if !(tau_in > 0.0) {
                return Err(Error::Config(format!("tau_in must be positive, got {tau_in}")));
            }
            Ok(inner_closed_loop(tau_in).realize())
        }
        InnerRealization::DoubleIntegrator(variant) => {
            close_loop(&double_integrator().realize(), &design_inner_controller(tau_in, variant)?.realize())
        }
    }
}

/// Six decoupled joint loops with an output disturbance port.
#[derive(Debug, Clone)]
pub struct InnerLoopModel {
    pub tau_in: f64,
    blocks: Vec<StateSpaceBlock>,
}

impl InnerLoopModel {
    pub fn new(tau_in: f64, realization: InnerRealization) -> Result<Self> {
        let block = realize_joint_loop(tau_in, realization)?;
        Ok(Self { tau_in, blocks: vec![block; 6] })
    }

    /// Puts every joint at rest at `q0`.
    pub fn initialize_at(&mut self, q0: &JointAngles) -> Result<()> {
        for (blk, q) in self.blocks.iter_mut().zip(q0.iter()) {
            blk.set_steady_state(*q)?;
        }
        Ok(())
    }

    /// Current joint outputs `q_T`. The loops are strictly proper, so this
    /// does not depend on the reference.
    pub fn output(&self) -> JointAngles {
        JointAngles::from_iterator(self.blocks.iter().map(|b| b.output(0.0)))
    }

    /// Advances all joints one step toward `q_ref`; returns `(q_T, q_T + d)`.
    pub fn step(&mut self, q_ref: &JointAngles, d_qt: &JointAngles, dt: f64) -> Result<(JointAngles, JointAngles)> {
        let mut q_t = JointAngles::zeros();
        for (i, blk) in self.blocks.iter_mut().enumerate() {
            q_t[i] = blk.step(q_ref[i], dt)?;
        }
        Ok((q_t, q_t + d_qt))
    }

    pub fn min_time_constant(&self) -> Option<f64> {
        self.blocks[0].min_time_constant()
    }

    pub fn states(&self) -> Vec<DVector<f64>> {
        self.blocks.iter().map(|b| b.x.clone()).collect()
    }
}
