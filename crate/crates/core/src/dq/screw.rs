use nalgebra::Vector3;

use super::dual::{DualQuaternion, UnitDualQuaternion};
use super::quaternion::Quaternion;

/// Screw decomposition of a rigid displacement: rotation by `angle` about
/// the line with unit direction `axis` and moment `moment` (Plücker
/// coordinates, ⟨axis, moment⟩ = 0), plus `translation` meters along the
/// axis.
#[derive(Debug, Clone, Copy)]
pub struct ScrewParameters {
    pub axis: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub angle: f64,
    pub translation: f64,
}

impl ScrewParameters {
    /// Decodes screw parameters from a tangent-space element in half-angle
    /// screw coordinates (the output of `UnitDualQuaternion::log`).
    ///
    /// For near-zero rotation angles the displacement degenerates to a pure
    /// translation; the axis is then the translation direction (x̂ if that
    /// is zero too) and the moment is zero.
    pub fn from_log(y: &DualQuaternion) -> Self {
        let a = y.primary.vector();
        let b = y.dual.vector();
        let half_angle = a.norm();

        if half_angle < 1e-12 {
            let d = 2.0 * b.norm();
            let axis = if b.norm() > 1e-300 { b / b.norm() } else { Vector3::x() };
            return ScrewParameters { axis, moment: Vector3::zeros(), angle: 2.0 * half_angle, translation: d };
        }

        let axis = a / half_angle;
        let half_d = b.dot(&axis);
        let moment = (b - axis * half_d) / half_angle;
        ScrewParameters {
            axis,
            moment,
            angle: 2.0 * half_angle,
            translation: 2.0 * half_d,
        }
    }

    /// Rebuilds the tangent-space element and exponentiates it back to a
    /// pose; inverse of `from_log` composed with `log`.
    pub fn to_pose(&self) -> UnitDualQuaternion {
        let a = self.axis * (self.angle / 2.0);
        let b = self.axis * (self.translation / 2.0) + self.moment * (self.angle / 2.0);
        UnitDualQuaternion::exp(&DualQuaternion::new(
            Quaternion::from_vector(a),
            Quaternion::from_vector(b),
        ))
    }

    /// A point on the screw axis (the one closest to the origin).
    pub fn axis_point(&self) -> Vector3<f64> {
        self.axis.cross(&self.moment)
    }
}
