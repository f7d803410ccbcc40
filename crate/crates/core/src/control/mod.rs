//! Joint, outer, and feedforward controllers plus the feature supervisor.

pub mod feedforward;
pub mod inner;
pub mod outer;
pub mod supervisor;

pub use feedforward::{forward_filter, FeedforwardBlock};
pub use inner::{
    design_inner_controller, realize_joint_loop, InnerControllerVariant, InnerLoopModel, InnerRealization,
};
pub use outer::{design_outer_bank, linearized_loop_check, OuterControllerBank, OuterParams};
pub use supervisor::{Mode, SupervisorState};
