//! Quaternion and unit-dual-quaternion algebra: screw parameters,
//! exponential/logarithm maps, screw linear interpolation (ScLERP) and the
//! Hamilton-operator machinery used by the vec-space controller.
//!
//! All types are immutable values and every operation is pure, so they can
//! be shared and called from any number of threads.

mod dual;
mod hamilton;
mod quaternion;
mod screw;

pub use dual::{pose_distance, DualQuaternion, UnitDualQuaternion};
pub use hamilton::{c8, hamilton_minus, hamilton_minus4, hamilton_plus, hamilton_plus4};
pub use quaternion::{PureQuaternion, Quaternion, UnitQuaternion, UNIT_NORM_TOL};
pub use screw::ScrewParameters;

/// Coefficient vector of a dual quaternion: (pw, px, py, pz, dw, dx, dy, dz).
pub type Vec8 = nalgebra::SVector<f64, 8>;

/// Dense 8×8 matrix over the coefficient space.
pub type Mat8 = nalgebra::SMatrix<f64, 8, 8>;
