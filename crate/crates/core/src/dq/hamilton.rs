//! Matrix realizations of quaternion and dual-quaternion multiplication on
//! coefficient vectors, used to express the control law in vec space.

use nalgebra::Matrix4;

use super::dual::DualQuaternion;
use super::quaternion::Quaternion;
use super::Mat8;

/// H⁺(a): vec(a·b) = H⁺(a)·vec(b) for quaternions.
pub fn hamilton_plus4(a: &Quaternion) -> Matrix4<f64> {
    Matrix4::new(
        a.w, -a.x, -a.y, -a.z,
        a.x, a.w, -a.z, a.y,
        a.y, a.z, a.w, -a.x,
        a.z, -a.y, a.x, a.w,
    )
}

/// H⁻(b): vec(a·b) = H⁻(b)·vec(a) for quaternions.
pub fn hamilton_minus4(b: &Quaternion) -> Matrix4<f64> {
    Matrix4::new(
        b.w, -b.x, -b.y, -b.z,
        b.x, b.w, b.z, -b.y,
        b.y, -b.z, b.w, b.x,
        b.z, b.y, -b.x, b.w,
    )
}

/// H⁻(x) for dual quaternions: vec8(a·x) = H⁻(x)·vec8(a).
pub fn hamilton_minus(x: &DualQuaternion) -> Mat8 {
    let hp = hamilton_minus4(&x.primary);
    let hd = hamilton_minus4(&x.dual);
    let mut m = Mat8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&hp);
    m.fixed_view_mut::<4, 4>(4, 0).copy_from(&hd);
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&hp);
    m
}

/// H⁺(x) for dual quaternions: vec8(x·a) = H⁺(x)·vec8(a).
pub fn hamilton_plus(x: &DualQuaternion) -> Mat8 {
    let hp = hamilton_plus4(&x.primary);
    let hd = hamilton_plus4(&x.dual);
    let mut m = Mat8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&hp);
    m.fixed_view_mut::<4, 4>(4, 0).copy_from(&hd);
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&hp);
    m
}

/// Diagonal conjugation matrix: vec8(x*) = C₈·vec8(x).
pub fn c8() -> Mat8 {
    Mat8::from_diagonal(&super::Vec8::from_column_slice(&[
        1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dq::dual::UnitDualQuaternion;
    use crate::dq::Vec8;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dq(rng: &mut ChaCha8Rng) -> DualQuaternion {
        use rand::Rng;
        let mut v = [0.0f64; 8];
        for c in v.iter_mut() {
            *c = rng.gen_range(-2.0..2.0);
        }
        DualQuaternion::from_vec8(&Vec8::from_column_slice(&v))
    }

    #[test]
    fn hamilton_minus_identity_is_identity_matrix() {
        let m = hamilton_minus(&DualQuaternion::ONE);
        assert!((m - Mat8::identity()).norm() < 1e-15);
    }

    #[test]
    fn hamilton_minus_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let a = random_dq(&mut rng);
            let x = random_dq(&mut rng);
            let direct = (a * x).vec8();
            let mapped = hamilton_minus(&x) * a.vec8();
            assert!((direct - mapped).norm() < 1e-12);
        }
    }

    #[test]
    fn hamilton_plus_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..200 {
            let x = random_dq(&mut rng);
            let a = random_dq(&mut rng);
            let direct = (x * a).vec8();
            let mapped = hamilton_plus(&x) * a.vec8();
            assert!((direct - mapped).norm() < 1e-12);
        }
    }

    #[test]
    fn hamilton_minus_of_product_composes() {
        // vec(a·x1·x2) = H⁻(x2)·H⁻(x1)·vec(a) ⇒ H⁻(x1·x2) = H⁻(x2)·H⁻(x1)
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..100 {
            let x1 = random_dq(&mut rng);
            let x2 = random_dq(&mut rng);
            let lhs = hamilton_minus(&(x1 * x2));
            let rhs = hamilton_minus(&x2) * hamilton_minus(&x1);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn c8_realizes_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..200 {
            let x = random_dq(&mut rng);
            let direct = x.conjugate().vec8();
            let mapped = c8() * x.vec8();
            assert!((direct - mapped).norm() < 1e-15);
        }
    }

    #[test]
    fn c8_is_involutory_and_fixes_identity() {
        let c = c8();
        assert!((c * c - Mat8::identity()).norm() < 1e-15);
        let id = UnitDualQuaternion::IDENTITY.vec8();
        assert!((c * id - id).norm() < 1e-15);
    }
}
