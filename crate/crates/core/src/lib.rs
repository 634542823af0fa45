//! Task-space motion planning from a single demonstrated pose sequence.
//!
//! The toolkit generates point-to-point plans by replaying the relative
//! rigid-body transformations of one demonstration toward a new goal,
//! blending in from a new start via screw linear interpolation, deflecting
//! reactively around spherical obstacles with tangent-plane escape trees,
//! and tracking the result with a dual-quaternion kinematic controller over
//! simulated serial-manipulator kinematics.

pub mod avoidance;
pub mod control;
pub mod dq;
pub mod error;
pub mod formats;
pub mod kinematics;
pub mod planner;
pub mod sim;

pub use dq::{
    c8, hamilton_minus, hamilton_plus, pose_distance, DualQuaternion, Mat8, PureQuaternion,
    Quaternion, ScrewParameters, UnitDualQuaternion, UnitQuaternion, Vec8,
};
pub use error::{Error, Result};
pub use kinematics::{JointConfig, SerialManipulator};
pub use planner::{PathKind, PlannerParams, PosePath};
