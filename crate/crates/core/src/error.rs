use thiserror::Error;

/// Errors raised anywhere in the servo pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    ImproperTransferFunction { num: usize, den: usize },

    #[error("denominator has zero leading coefficient")]
    ZeroDenominator,

    #[error("pole on the imaginary axis at omega = {omega} rad/s")]
    PoleOnAxis { omega: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("target out of workspace: wrist-center distance {distance:.6} m outside [{min:.6}, {max:.6}] m")]
    OutOfWorkspace { distance: f64, min: f64, max: f64 },

    #[error("point behind camera (Z = {z:.3e} m)")]
    BehindCamera { z: f64 },

    #[error("invalid disparity {disparity:.3e} mm")]
    InvalidDisparity { disparity: f64 },

    #[error("degenerate feature geometry: {0}")]
    DegenerateFeatures(String),

    #[error("feature loss: {0}")]
    FeatureLoss(String),

    #[error("marker {index} out of view")]
    MarkerOutOfView { index: usize },

    #[error("jacobian stencil produced non-finite features at joint {joint}")]
    JacobianStencil { joint: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation aborted at sample {sample}: {source}")]
    Aborted {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image format error: {0}")]
    ImageFormat(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Io(_) | Error::ImageFormat(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
