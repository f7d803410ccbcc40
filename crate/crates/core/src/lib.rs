//! Feedforward/feedback visual servoing of a six-axis arm observed by a
//! fixed stereo camera.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod lti;
pub mod servo;
pub mod sim;
pub mod stereo;
pub mod vision;

pub use error::{Error, Result};
