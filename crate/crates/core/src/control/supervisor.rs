//! Chooses between measured and model-estimated features.

use crate::error::{Error, Result};
use crate::servo::ObservedFeatures;
use crate::stereo::{point_within, CameraIntrinsics, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Measured,
    Estimated,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Measured => "measured",
            Mode::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisorState {
    pub mode: Mode,
    /// Fraction of each image half-extent that features must clear before
    /// measurements are trusted again.
    pub hysteresis_margin: f64,
    pub transitions: usize,
}

impl SupervisorState {
    pub fn new(hysteresis_margin: f64) -> Result<Self> {
        if !(0.0..=0.2).contains(&hysteresis_margin) {
            return Err(Error::Config(format!("hysteresis margin must be in [0, 0.2], got {hysteresis_margin}")));
        }
        Ok(Self { mode: Mode::Estimated, hysteresis_margin, transitions: 0 })
    }

    /// Picks the features for this sample and updates the mode.
    pub fn select(
        &mut self,
        intr: &CameraIntrinsics,
        measured: Option<&ObservedFeatures>,
        estimated: &FeatureVector,
    ) -> (FeatureVector, Mode) {
        let next = match measured {
            Some(m) if m.all_in_view() && m.features.is_finite() => {
                let clear = (0..2).all(|i| point_within(intr, &m.features.point(i), self.hysteresis_margin));
                if self.mode == Mode::Measured || clear {
                    Mode::Measured
                } else {
                    Mode::Estimated
                }
            }
            _ => Mode::Estimated,
        };
        if next != self.mode {
            self.transitions += 1;
            self.mode = next;
        }
        match (next, measured) {
            (Mode::Measured, Some(m)) => (m.features, next),
            _ => (*estimated, next),
        }
    }
}
