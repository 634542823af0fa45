use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Default tolerance for unit-norm validation of quaternions and poses.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A quaternion `w + x i + y j + z k` with Hamilton product convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const ONE: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Quaternion with zero scalar part from a 3-vector.
    pub fn from_vector(v: Vector3<f64>) -> Self {
        Quaternion { w: 0.0, x: v.x, y: v.y, z: v.z }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn conjugate(&self) -> Self {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Quaternion { w: self.w * s, x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: f64) -> Quaternion {
        self.scale(rhs)
    }
}

/// A quaternion constrained to unit norm, representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::ONE);

    /// Validates the norm against `tol` and renormalizes the residual.
    pub fn try_new(q: Quaternion, tol: f64) -> Result<Self> {
        let norm = q.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::NonUnitQuaternion { norm, tol });
        }
        Ok(UnitQuaternion(q.scale(1.0 / norm)))
    }

    pub fn new_normalize(q: Quaternion) -> Self {
        let norm = q.norm();
        assert!(norm > 0.0, "cannot normalize a zero quaternion");
        UnitQuaternion(q.scale(1.0 / norm))
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        assert!(n > 0.0, "rotation axis must be nonzero");
        let (s, c) = (angle / 2.0).sin_cos();
        let v = axis * (s / n);
        UnitQuaternion(Quaternion { w: c, x: v.x, y: v.y, z: v.z })
    }

    pub fn as_quaternion(&self) -> Quaternion {
        self.0
    }

    pub fn conjugate(&self) -> Self {
        UnitQuaternion(self.0.conjugate())
    }

    /// Rotation angle in [0, π] and the corresponding axis.
    /// The axis is arbitrary (x̂) for the identity rotation.
    pub fn axis_angle(&self) -> (Vector3<f64>, f64) {
        let q = if self.0.w < 0.0 { -self.0 } else { self.0 };
        let v = q.vector();
        let s = v.norm();
        let angle = 2.0 * s.atan2(q.w);
        if s < 1e-300 {
            (Vector3::x(), angle)
        } else {
            (v / s, angle)
        }
    }

    pub fn rotate_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        let r = self.0 * Quaternion::from_vector(v) * self.0.conjugate();
        r.vector()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(self.0 * rhs.0)
    }
}

/// A quaternion with identically zero scalar part; used for translations
/// (meters) and tangent-space vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PureQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PureQuaternion {
    pub const ZERO: PureQuaternion = PureQuaternion { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        PureQuaternion { x, y, z }
    }

    pub fn as_quaternion(&self) -> Quaternion {
        Quaternion { w: 0.0, x: self.x, y: self.y, z: self.z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }
}

impl From<Vector3<f64>> for PureQuaternion {
    fn from(v: Vector3<f64>) -> Self {
        PureQuaternion { x: v.x, y: v.y, z: v.z }
    }
}

impl From<PureQuaternion> for Vector3<f64> {
    fn from(p: PureQuaternion) -> Self {
        p.as_vector()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn arb_quat() -> impl Strategy<Value = Quaternion> {
        let s = -2.0..2.0f64;
        (s.clone(), s.clone(), s.clone(), s).prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
    }

    proptest! {
        #[test]
        fn multiplication_associative(a in arb_quat(), b in arb_quat(), c in arb_quat()) {
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn conjugate_reverses_products(a in arb_quat(), b in arb_quat()) {
            let lhs = (a * b).conjugate();
            let rhs = b.conjugate() * a.conjugate();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn rotate_vector_quarter_turn() {
        let q = UnitQuaternion::from_axis_angle(Vector3::z(), FRAC_PI_2);
        let r = q.rotate_vector(Vector3::x());
        assert_relative_eq!(r, Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn try_new_rejects_non_unit() {
        let q = Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(UnitQuaternion::try_new(q, 1e-9).is_err());
        assert!(UnitQuaternion::try_new(q, 0.2).is_ok());
    }

    #[test]
    fn axis_angle_round_trip() {
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        let q = UnitQuaternion::from_axis_angle(axis, 1.3);
        let (a, ang) = q.axis_angle();
        assert_relative_eq!(ang, 1.3, epsilon = 1e-12);
        assert_relative_eq!(a, axis, epsilon = 1e-12);
    }
}
