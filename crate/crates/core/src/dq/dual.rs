use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;

use super::quaternion::{PureQuaternion, Quaternion, UnitQuaternion};
use super::screw::ScrewParameters;
use super::Vec8;
use crate::error::{Error, Result};

/// Half rotation angle below which sinc-type factors switch to their
/// fourth-order Taylor series. Direct evaluation of `(1 - u·cot u)/sin²u`
/// loses ~`3e-16/u²` relative accuracy to cancellation, so the crossover
/// sits where both branches are accurate to ~1e-12.
const SMALL_HALF_ANGLE: f64 = 0.02;

/// A dual quaternion `primary + ε·dual` with ε² = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuaternion {
    pub primary: Quaternion,
    pub dual: Quaternion,
}

impl DualQuaternion {
    pub const ZERO: DualQuaternion =
        DualQuaternion { primary: Quaternion::ZERO, dual: Quaternion::ZERO };
    pub const ONE: DualQuaternion =
        DualQuaternion { primary: Quaternion::ONE, dual: Quaternion::ZERO };

    pub fn new(primary: Quaternion, dual: Quaternion) -> Self {
        DualQuaternion { primary, dual }
    }

    /// Quaternionic conjugate of both parts.
    pub fn conjugate(&self) -> Self {
        DualQuaternion { primary: self.primary.conjugate(), dual: self.dual.conjugate() }
    }

    pub fn scale(&self, s: f64) -> Self {
        DualQuaternion { primary: self.primary.scale(s), dual: self.dual.scale(s) }
    }

    /// Coefficient vector (pw, px, py, pz, dw, dx, dy, dz).
    pub fn vec8(&self) -> Vec8 {
        Vec8::from_column_slice(&[
            self.primary.w,
            self.primary.x,
            self.primary.y,
            self.primary.z,
            self.dual.w,
            self.dual.x,
            self.dual.y,
            self.dual.z,
        ])
    }

    pub fn from_vec8(v: &Vec8) -> Self {
        DualQuaternion {
            primary: Quaternion::new(v[0], v[1], v[2], v[3]),
            dual: Quaternion::new(v[4], v[5], v[6], v[7]),
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.primary.norm_squared() + self.dual.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.primary.is_finite() && self.dual.is_finite()
    }
}

impl Add for DualQuaternion {
    type Output = DualQuaternion;
    fn add(self, rhs: DualQuaternion) -> DualQuaternion {
        DualQuaternion { primary: self.primary + rhs.primary, dual: self.dual + rhs.dual }
    }
}

impl Sub for DualQuaternion {
    type Output = DualQuaternion;
    fn sub(self, rhs: DualQuaternion) -> DualQuaternion {
        DualQuaternion { primary: self.primary - rhs.primary, dual: self.dual - rhs.dual }
    }
}

impl Neg for DualQuaternion {
    type Output = DualQuaternion;
    fn neg(self) -> DualQuaternion {
        DualQuaternion { primary: -self.primary, dual: -self.dual }
    }
}

impl Mul for DualQuaternion {
    type Output = DualQuaternion;
    /// (a + εb)(c + εd) = ac + ε(ad + bc), since ε² = 0.
    fn mul(self, rhs: DualQuaternion) -> DualQuaternion {
        DualQuaternion {
            primary: self.primary * rhs.primary,
            dual: self.primary * rhs.dual + self.dual * rhs.primary,
        }
    }
}

impl Mul<f64> for DualQuaternion {
    type Output = DualQuaternion;
    fn mul(self, rhs: f64) -> DualQuaternion {
        self.scale(rhs)
    }
}

/// A unit dual quaternion: ‖primary‖ = 1 and ⟨primary, dual⟩ = 0.
/// Represents a rigid-body pose `r + ½ ε p r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDualQuaternion(DualQuaternion);

impl UnitDualQuaternion {
    pub const IDENTITY: UnitDualQuaternion = UnitDualQuaternion(DualQuaternion::ONE);

    /// Validates the unit-norm conditions against `tol`, then projects
    /// exactly onto the constraint manifold.
    pub fn try_new(dq: DualQuaternion, tol: f64) -> Result<Self> {
        let norm = dq.primary.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::NonUnitDualQuaternion {
                reason: format!("|primary| = {norm}, tolerance {tol}"),
            });
        }
        let orthogonality = dq.primary.dot(&dq.dual) / norm;
        if orthogonality.abs() > tol {
            return Err(Error::NonUnitDualQuaternion {
                reason: format!("<primary, dual> = {orthogonality}, tolerance {tol}"),
            });
        }
        Ok(Self::new_normalize(dq))
    }

    /// Projects onto the unit constraint: normalizes the primary part and
    /// removes the dual component parallel to it.
    pub fn new_normalize(dq: DualQuaternion) -> Self {
        let norm = dq.primary.norm();
        assert!(norm > 0.0, "cannot normalize a dual quaternion with zero primary part");
        let primary = dq.primary.scale(1.0 / norm);
        let dual = dq.dual.scale(1.0 / norm);
        let dual = dual - primary.scale(primary.dot(&dual));
        UnitDualQuaternion(DualQuaternion { primary, dual })
    }

    /// Wraps without validating or projecting; the caller guarantees the
    /// unit conditions hold. Exact round trips (e.g. re-reading serialized
    /// poses) need this to avoid perturbing the coefficients.
    pub fn new_unchecked(dq: DualQuaternion) -> Self {
        UnitDualQuaternion(dq)
    }

    /// Pose from a rotation and a translation: `x = r + ½ ε p r`.
    pub fn from_rotation_translation(r: UnitQuaternion, p: PureQuaternion) -> Self {
        let rq = r.as_quaternion();
        let dual = (p.as_quaternion() * rq).scale(0.5);
        UnitDualQuaternion(DualQuaternion { primary: rq, dual })
    }

    pub fn from_translation(p: PureQuaternion) -> Self {
        Self::from_rotation_translation(UnitQuaternion::IDENTITY, p)
    }

    pub fn as_dual_quaternion(&self) -> DualQuaternion {
        self.0
    }

    pub fn primary(&self) -> Quaternion {
        self.0.primary
    }

    pub fn dual(&self) -> Quaternion {
        self.0.dual
    }

    pub fn vec8(&self) -> Vec8 {
        self.0.vec8()
    }

    pub fn rotation(&self) -> UnitQuaternion {
        UnitQuaternion::new_normalize(self.0.primary)
    }

    /// Translation `p = 2 · dual · primary*`; inverse of
    /// `from_rotation_translation`.
    pub fn translation(&self) -> PureQuaternion {
        let t = (self.0.dual * self.0.primary.conjugate()).scale(2.0);
        PureQuaternion::new(t.x, t.y, t.z)
    }

    /// Group inverse `x* = r* + ½ ε r* p*`.
    pub fn conjugate(&self) -> Self {
        UnitDualQuaternion(self.0.conjugate())
    }

    /// Flips the overall sign so the primary scalar is non-negative,
    /// selecting the representative on the w ≥ 0 hemisphere of the double
    /// cover (the shorter screw).
    pub fn sign_normalized(&self) -> Self {
        if self.0.primary.w < 0.0 {
            UnitDualQuaternion(-self.0)
        } else {
            *self
        }
    }

    /// Applies the rigid transformation to a point: `R·v + t`.
    pub fn transform_point(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation().rotate_vector(v) + self.translation().as_vector()
    }

    /// Logarithm map to the tangent space at the identity, in half-angle
    /// screw coordinates: `log(x) = (θ/2)·l + ε((d/2)·l + (θ/2)·m)` for a
    /// screw of angle θ, pitch translation d about the axis (l, m).
    ///
    /// The primary part is sign-normalized to w ≥ 0 first. Near θ = π the
    /// axis is taken from the vector part directly; precision there is
    /// reduced to ~1e-7.
    pub fn log(&self) -> DualQuaternion {
        let x = self.sign_normalized().0;
        let v = x.primary.vector();
        let dv = x.dual.vector();
        let s = v.norm(); // sin(θ/2) for a unit primary part
        let u = s.atan2(x.primary.w); // θ/2 ∈ [0, π/2]

        if s < 1e-300 {
            // Pure translation limit: log = ε · p/2 (dual part is already
            // orthogonal to the scalar primary, so it is p/2 exactly).
            return DualQuaternion::new(Quaternion::ZERO, Quaternion::from_vector(dv));
        }

        let alpha = u / s; // θ/2 / sin(θ/2), stable for any s > 0
        let beta = if u < SMALL_HALF_ANGLE {
            let u2 = u * u;
            1.0 / 3.0 + u2 * (2.0 / 15.0) + u2 * u2 * (2.0 / 63.0)
        } else {
            (1.0 - u * x.primary.w / s) / (s * s)
        };

        let a = v * alpha;
        let b = dv * alpha - v * (x.dual.w * beta);
        DualQuaternion::new(Quaternion::from_vector(a), Quaternion::from_vector(b))
    }

    /// Exponential map from the tangent space at the identity (half-angle
    /// screw coordinates) back to the unit dual quaternions.
    pub fn exp(y: &DualQuaternion) -> Self {
        let a = y.primary.vector();
        let b = y.dual.vector();
        let u = a.norm();
        let dot = a.dot(&b);

        let (c, sinc, g) = if u < SMALL_HALF_ANGLE {
            let u2 = u * u;
            let u4 = u2 * u2;
            (
                u.cos(),
                1.0 - u2 / 6.0 + u4 / 120.0,
                -1.0 / 3.0 + u2 / 30.0 - u4 / 840.0,
            )
        } else {
            let (s, c) = u.sin_cos();
            (c, s / u, (u * c - s) / (u * u * u))
        };

        let primary = Quaternion {
            w: c,
            x: sinc * a.x,
            y: sinc * a.y,
            z: sinc * a.z,
        };
        let dvec = b * sinc + a * (dot * g);
        let dual = Quaternion { w: -dot * sinc, x: dvec.x, y: dvec.y, z: dvec.z };
        Self::new_normalize(DualQuaternion { primary, dual })
    }

    /// Screw power `x^τ = exp(τ · log(x))`. Shares the screw axis of `x`
    /// for every τ and satisfies `x^0 = 1`, `x^1 = x` (after sign
    /// normalization).
    pub fn pow(&self, tau: f64) -> Self {
        Self::exp(&self.log().scale(tau))
    }

    /// Screw linear interpolation `x1 · (x1* x2)^τ`: the geodesic from `x1`
    /// (τ = 0) to `x2` (τ = 1) with a constant screw axis relative to `x1`.
    pub fn sclerp(x1: &Self, x2: &Self, tau: f64) -> Self {
        *x1 * (x1.conjugate() * *x2).pow(tau)
    }

    /// Extracts the screw parameters (axis line, angle, translation along
    /// the axis) of the displacement.
    pub fn screw_parameters(&self) -> ScrewParameters {
        ScrewParameters::from_log(&self.log())
    }

    /// Unit-norm defect diagnostics: (|‖primary‖ − 1|, |⟨primary, dual⟩|).
    pub fn unit_defect(&self) -> (f64, f64) {
        ((self.0.primary.norm() - 1.0).abs(), self.0.primary.dot(&self.0.dual).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Uniformly random rotation with translation components in
    /// [-max_translation, max_translation]; used by tests, fixtures and
    /// randomized harness scenarios.
    pub fn sample<R: rand::Rng>(rng: &mut R, max_translation: f64) -> Self {
        loop {
            let q = Quaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = q.norm();
            if n > 1e-3 && n <= 1.0 {
                let r = UnitQuaternion::new_normalize(q);
                let p = PureQuaternion::new(
                    rng.gen_range(-max_translation..=max_translation),
                    rng.gen_range(-max_translation..=max_translation),
                    rng.gen_range(-max_translation..=max_translation),
                );
                return Self::from_rotation_translation(r, p);
            }
        }
    }
}

impl Mul for UnitDualQuaternion {
    type Output = UnitDualQuaternion;
    fn mul(self, rhs: UnitDualQuaternion) -> UnitDualQuaternion {
        UnitDualQuaternion(self.0 * rhs.0)
    }
}

/// Vec-space distance between two poses with the double cover resolved:
/// `min(‖vec(a) − vec(b)‖, ‖vec(a) + vec(b)‖)`.
pub fn pose_distance(a: &UnitDualQuaternion, b: &UnitDualQuaternion) -> f64 {
    let va = a.vec8();
    let vb = b.vec8();
    ((va - vb).norm()).min((va + vb).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dq::quaternion::UNIT_NORM_TOL;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rot_z(angle: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(Vector3::z(), angle)
    }

    /// Reference dual product by explicit expansion over the basis
    /// (1, i, j, k, ε, εi, εj, εk) with ε² = 0; independent of the
    /// structured (ac, ad + bc) implementation.
    fn reference_mul(a: &DualQuaternion, b: &DualQuaternion) -> DualQuaternion {
        // basis index: quaternion part q in 0..4, dual flag e in {0, 1}
        let av = a.vec8();
        let bv = b.vec8();
        // quaternion basis multiplication table: (sign, index)
        const TABLE: [[(f64, usize); 4]; 4] = [
            [(1.0, 0), (1.0, 1), (1.0, 2), (1.0, 3)],
            [(1.0, 1), (-1.0, 0), (1.0, 3), (-1.0, 2)],
            [(1.0, 2), (-1.0, 3), (-1.0, 0), (1.0, 1)],
            [(1.0, 3), (1.0, 2), (-1.0, 1), (-1.0, 0)],
        ];
        let mut out = [0.0f64; 8];
        for ia in 0..8 {
            for ib in 0..8 {
                let (ea, qa) = (ia / 4, ia % 4);
                let (eb, qb) = (ib / 4, ib % 4);
                let e = ea + eb;
                if e > 1 {
                    continue; // ε² = 0
                }
                let (sign, q) = TABLE[qa][qb];
                out[e * 4 + q] += sign * av[ia] * bv[ib];
            }
        }
        DualQuaternion::from_vec8(&Vec8::from_column_slice(&out))
    }

    fn arb_dq() -> impl Strategy<Value = DualQuaternion> {
        proptest::collection::vec(-2.0..2.0f64, 8).prop_map(|v| {
            DualQuaternion::from_vec8(&Vec8::from_column_slice(&v))
        })
    }

    proptest! {
        #[test]
        fn epsilon_algebra_matches_reference(a in arb_dq(), b in arb_dq()) {
            let fast = a * b;
            let slow = reference_mul(&a, &b);
            prop_assert!((fast - slow).vec8().norm() < 1e-12);
        }

        #[test]
        fn dual_conjugate_reverses_products(a in arb_dq(), b in arb_dq()) {
            let lhs = (a * b).conjugate();
            let rhs = b.conjugate() * a.conjugate();
            prop_assert!((lhs - rhs).vec8().norm() < 1e-12);
        }
    }

    #[test]
    fn vec8_round_trip_is_exact() {
        let x = DualQuaternion::new(
            Quaternion::new(0.1, -0.2, 0.3, 0.4),
            Quaternion::new(-0.5, 0.6, -0.7, 0.8),
        );
        assert_eq!(DualQuaternion::from_vec8(&x.vec8()), x);
    }

    #[test]
    fn identity_construction() {
        let x = UnitDualQuaternion::from_rotation_translation(
            UnitQuaternion::IDENTITY,
            PureQuaternion::ZERO,
        );
        assert_eq!(x.vec8(), UnitDualQuaternion::IDENTITY.vec8());
    }

    #[test]
    fn pure_translation_construction() {
        let x = UnitDualQuaternion::from_translation(PureQuaternion::new(1.0, 2.0, 3.0));
        let v = x.vec8();
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.5];
        for i in 0..8 {
            assert_relative_eq!(v[i], expected[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn pure_rotation_construction() {
        let x = UnitDualQuaternion::from_rotation_translation(
            rot_z(FRAC_PI_2),
            PureQuaternion::ZERO,
        );
        let v = x.vec8();
        let c = (PI / 4.0).cos();
        assert_relative_eq!(v[0], c, epsilon = 1e-15);
        assert_relative_eq!(v[3], c, epsilon = 1e-15);
        assert_relative_eq!(v.fixed_rows::<4>(4).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn translation_identity_is_zero() {
        let t = UnitDualQuaternion::IDENTITY.translation();
        assert_eq!(t.as_vector(), Vector3::zeros());
    }

    #[test]
    fn translation_from_components() {
        // primary = 1, dual = (0, 0.5, 1, 1.5) → p = 2·dual·primary* = (1,2,3)
        let x = UnitDualQuaternion::try_new(
            DualQuaternion::new(Quaternion::ONE, Quaternion::new(0.0, 0.5, 1.0, 1.5)),
            1e-9,
        )
        .unwrap();
        assert_relative_eq!(x.translation().as_vector(), Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
    }

    #[test]
    fn rotation_translation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = UnitDualQuaternion::sample(&mut rng, 2.0);
            let y = UnitDualQuaternion::from_rotation_translation(x.rotation(), x.translation());
            assert!(pose_distance(&x, &y) < 1e-12);
        }
    }

    #[test]
    fn log_identity_is_zero() {
        let y = UnitDualQuaternion::IDENTITY.log();
        assert_eq!(y.vec8().norm(), 0.0);
    }

    #[test]
    fn log_pure_translation_is_half_translation() {
        let x = UnitDualQuaternion::from_translation(PureQuaternion::new(2.0, 0.0, 0.0));
        let y = x.log();
        assert_relative_eq!(y.primary.norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(y.dual.vector(), Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        // exp of the log reproduces the pose
        let back = UnitDualQuaternion::exp(&y);
        assert!(pose_distance(&x, &back) < 1e-15);
    }

    #[test]
    fn log_pure_rotation_is_half_angle_axis() {
        let theta = 0.8;
        let n = Vector3::new(1.0, 2.0, -1.0).normalize();
        let x = UnitDualQuaternion::from_rotation_translation(
            UnitQuaternion::from_axis_angle(n, theta),
            PureQuaternion::ZERO,
        );
        let y = x.log();
        assert_relative_eq!(y.primary.vector(), n * (theta / 2.0), epsilon = 1e-12);
        assert_relative_eq!(y.dual.norm(), 0.0, epsilon = 1e-12);
        let back = UnitDualQuaternion::exp(&y);
        assert!(pose_distance(&x, &back) < 1e-12);
    }

    #[test]
    fn exp_zero_is_identity() {
        let x = UnitDualQuaternion::exp(&DualQuaternion::ZERO);
        assert_eq!(x.vec8(), UnitDualQuaternion::IDENTITY.vec8());
    }

    #[test]
    fn exp_half_translation() {
        let y = DualQuaternion::new(
            Quaternion::ZERO,
            Quaternion::from_vector(Vector3::new(1.0, 0.0, 0.0)),
        );
        let x = UnitDualQuaternion::exp(&y);
        let expected = UnitDualQuaternion::from_translation(PureQuaternion::new(2.0, 0.0, 0.0));
        assert!(pose_distance(&x, &expected) < 1e-15);
    }

    #[test]
    fn exp_log_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = UnitDualQuaternion::sample(&mut rng, 2.0).sign_normalized();
            let back = UnitDualQuaternion::exp(&x.log());
            assert!(
                pose_distance(&x, &back) < 1e-9,
                "round trip failed: {:?}",
                x
            );
        }
    }

    #[test]
    fn exp_log_round_trip_extreme_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &angle in &[1e-12, 1e-9, 1e-6, 1e-3, 0.019, 0.021, PI - 1e-6, PI - 1e-3] {
            for _ in 0..50 {
                let axis = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
                let p = PureQuaternion::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                );
                let x = UnitDualQuaternion::from_rotation_translation(
                    UnitQuaternion::from_axis_angle(axis, angle),
                    p,
                );
                let back = UnitDualQuaternion::exp(&x.log());
                let tol = if angle > PI - 1e-2 { 1e-7 } else { 1e-9 };
                assert!(
                    pose_distance(&x, &back) < tol,
                    "angle {angle}: deviation {}",
                    pose_distance(&x, &back)
                );
            }
        }
    }

    #[test]
    fn pow_zero_and_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let x = UnitDualQuaternion::sample(&mut rng, 1.5);
            assert!(pose_distance(&x.pow(0.0), &UnitDualQuaternion::IDENTITY) < 1e-15);
            assert!(pose_distance(&x.pow(1.0), &x) < 1e-9);
        }
    }

    #[test]
    fn pow_half_rotation_matches_slerp_oracle() {
        // (90° about z)^0.5 must be 45° about z; the oracle is plain
        // quaternion axis-angle halving.
        let x = UnitDualQuaternion::from_rotation_translation(
            rot_z(FRAC_PI_2),
            PureQuaternion::ZERO,
        );
        let half = x.pow(0.5);
        let expected = UnitDualQuaternion::from_rotation_translation(
            rot_z(FRAC_PI_2 / 2.0),
            PureQuaternion::ZERO,
        );
        assert!(pose_distance(&half, &expected) < 1e-12);
    }

    #[test]
    fn sclerp_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let x1 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let x2 = UnitDualQuaternion::sample(&mut rng, 1.5);
            assert!(pose_distance(&UnitDualQuaternion::sclerp(&x1, &x2, 0.0), &x1) < 1e-9);
            assert!(pose_distance(&UnitDualQuaternion::sclerp(&x1, &x2, 1.0), &x2) < 1e-9);
        }
    }

    #[test]
    fn sclerp_pure_translation_is_linear() {
        let x1 = UnitDualQuaternion::IDENTITY;
        let x2 = UnitDualQuaternion::from_translation(PureQuaternion::new(4.0, 0.0, 0.0));
        let mid = UnitDualQuaternion::sclerp(&x1, &x2, 0.25);
        assert_relative_eq!(
            mid.translation().as_vector(),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(mid.rotation().as_quaternion().w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sclerp_left_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let g = UnitDualQuaternion::sample(&mut rng, 1.5);
            let x1 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let x2 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let tau = rng.gen_range(0.0..1.0);
            let lhs = UnitDualQuaternion::sclerp(&(g * x1), &(g * x2), tau);
            let rhs = g * UnitDualQuaternion::sclerp(&x1, &x2, tau);
            assert!(pose_distance(&lhs, &rhs) < 1e-9);
        }
    }

    #[test]
    fn sclerp_double_cover_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let x1 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let x2 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let neg_x2 = UnitDualQuaternion::new_unchecked(-x2.as_dual_quaternion());
            let tau = rng.gen_range(0.0..1.0);
            let a = UnitDualQuaternion::sclerp(&x1, &x2, tau);
            let b = UnitDualQuaternion::sclerp(&x1, &neg_x2, tau);
            assert!(pose_distance(&a, &b) < 1e-9);
        }
    }

    #[test]
    fn sclerp_screw_axis_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let x1 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let x2 = UnitDualQuaternion::sample(&mut rng, 1.5);
            let full = (x1.conjugate() * x2).sign_normalized();
            let reference = full.screw_parameters();
            if reference.angle < 1e-3 {
                continue; // axis ill-conditioned for near-pure translations
            }
            for k in 1..10 {
                let tau = k as f64 / 10.0;
                let partial = x1.conjugate() * UnitDualQuaternion::sclerp(&x1, &x2, tau);
                let params = partial.screw_parameters();
                let deviation = reference.axis.cross(&params.axis).norm();
                assert!(
                    deviation < 1e-8,
                    "axis deviated by {deviation} at tau = {tau}"
                );
            }
        }
    }

    #[test]
    fn composition_acts_like_sequential_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        for _ in 0..100 {
            let a = UnitDualQuaternion::sample(&mut rng, 2.0);
            let b = UnitDualQuaternion::sample(&mut rng, 2.0);
            let v = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let composed = (a * b).transform_point(v);
            let sequential = a.transform_point(b.transform_point(v));
            assert!((composed - sequential).norm() < 1e-12);
        }
    }

    #[test]
    fn products_of_units_stay_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let a = UnitDualQuaternion::sample(&mut rng, 2.0);
            let b = UnitDualQuaternion::sample(&mut rng, 2.0);
            let (norm_defect, ortho_defect) = (a * b).unit_defect();
            assert!(norm_defect < 1e-9 && ortho_defect < 1e-9);
            let inv = (a * a.conjugate()).vec8();
            assert!((inv - UnitDualQuaternion::IDENTITY.vec8()).norm() < 1e-9);
        }
    }

    #[test]
    fn try_new_rejects_violations() {
        let bad_norm = DualQuaternion::new(Quaternion::new(1.1, 0.0, 0.0, 0.0), Quaternion::ZERO);
        assert!(UnitDualQuaternion::try_new(bad_norm, UNIT_NORM_TOL).is_err());
        let bad_ortho = DualQuaternion::new(Quaternion::ONE, Quaternion::new(0.5, 0.0, 0.0, 0.0));
        assert!(UnitDualQuaternion::try_new(bad_ortho, UNIT_NORM_TOL).is_err());
    }
}
