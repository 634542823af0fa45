//! Dual-quaternion kinematic feedback controller: vec-space error with a
//! Hamilton-operator extended Jacobian, damped-least-squares inversion,
//! nullspace joint-limit avoidance, and an obstacle-surface projection
//! layer that keeps commanded motion tangent to a constraint surface.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::dq::{
    c8, hamilton_minus, DualQuaternion, Quaternion, UnitDualQuaternion, Vec8,
};
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, SerialManipulator};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// Error decay gain (1/s).
    pub lambda_e: f64,
    /// Damped-least-squares regularization of the extended Jacobian.
    pub damping: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Per-joint velocity limit; infinite by default.
    pub qdot_max: f64,
    /// Scale of the joint-limit nullspace task.
    pub nullspace_gain: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            lambda_e: 10.0,
            damping: 0.01,
            dt: 1e-3,
            qdot_max: f64::INFINITY,
            nullspace_gain: 1.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_e <= 0.0 {
            return Err(Error::InvalidInput("lambda_e must be positive".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        if self.damping < 0.0 {
            return Err(Error::InvalidInput("damping must be non-negative".into()));
        }
        Ok(())
    }
}

/// Controller state: joint configuration, measured pose (forward
/// kinematics of `q` in simulation) and an end-effector linear velocity
/// estimate.
#[derive(Debug, Clone)]
pub struct ControlState {
    pub q: JointConfig,
    pub x_m: UnitDualQuaternion,
    pub v_ee: Vector3<f64>,
}

impl ControlState {
    pub fn from_config(model: &SerialManipulator, q: JointConfig) -> Result<Self> {
        let x_m = model.forward_kinematics(&q)?;
        Ok(ControlState { q, x_m, v_ee: Vector3::zeros() })
    }
}

/// Spatial error `vec(1 − x_m* x_d)` with the relative pose sign-normalized
/// so its primary scalar is ≥ 0; zero iff the poses agree as rigid
/// transformations.
pub fn spatial_error(x_m: &UnitDualQuaternion, x_d: &UnitDualQuaternion) -> Vec8 {
    let x_e = (x_m.conjugate() * *x_d).sign_normalized();
    (DualQuaternion::ONE - x_e.as_dual_quaternion()).vec8()
}

/// Extended Jacobian `N = H⁻(x_d)·C₈·J` mapping joint velocities to the
/// vec-space error rate.
pub fn extended_jacobian(x_d: &UnitDualQuaternion, jacobian: &DMatrix<f64>) -> DMatrix<f64> {
    let lift = hamilton_minus(&x_d.as_dual_quaternion()) * c8();
    let mut out = DMatrix::zeros(8, jacobian.ncols());
    for c in 0..jacobian.ncols() {
        let col = Vec8::from_column_slice(jacobian.column(c).as_slice());
        out.column_mut(c).copy_from_slice((lift * col).as_slice());
    }
    out
}

struct NFactors {
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl NFactors {
    fn new(n: &DMatrix<f64>) -> Self {
        NFactors { svd: n.clone().svd(true, true) }
    }

    /// Damped least-squares solve: Σ v_i · σ_i/(σ_i² + λ²) · ⟨u_i, rhs⟩.
    fn damped_solve(&self, rhs: &Vec8, damping: f64) -> DVector<f64> {
        let u = self.svd.u.as_ref().expect("svd computed with u");
        let v_t = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let ncols = v_t.ncols();
        let mut out = DVector::zeros(ncols);
        for (i, &sigma) in self.svd.singular_values.iter().enumerate() {
            let denom = sigma * sigma + damping * damping;
            if denom < 1e-300 {
                continue;
            }
            let gain = sigma / denom;
            let ui = u.column(i);
            let coeff = gain * (0..8).map(|r| ui[r] * rhs[r]).sum::<f64>();
            for c in 0..ncols {
                out[c] += coeff * v_t[(i, c)];
            }
        }
        out
    }

    /// Exact nullspace projector `I − N⁺N` with rank determined by a
    /// relative singular-value cutoff.
    fn nullspace_projector(&self) -> DMatrix<f64> {
        let v_t = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let n = v_t.ncols();
        let sigma_max = self
            .svd
            .singular_values
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let cutoff = (sigma_max * 1e-12).max(1e-14);
        let mut p = DMatrix::identity(n, n);
        for (i, &sigma) in self.svd.singular_values.iter().enumerate() {
            if sigma > cutoff {
                let vi = v_t.row(i);
                for r in 0..n {
                    for c in 0..n {
                        p[(r, c)] -= vi[r] * vi[c];
                    }
                }
            }
        }
        p
    }
}

/// Descent direction of the quadratic mid-range potential
/// `V(q) = ½ Σ ((q_i − mid_i)/range_i)²`.
fn mid_range_gradient_descent(model: &SerialManipulator, q: &JointConfig, gain: f64) -> DVector<f64> {
    let mut g = DVector::zeros(model.dof());
    for (i, joint) in model.joints.iter().enumerate() {
        let range = joint.range();
        g[i] = -gain * (q[i] - joint.mid_range()) / (range * range);
    }
    g
}

/// Joint-limit avoidance task projected into the nullspace of the extended
/// Jacobian; adding the result to any joint velocity never changes `N·q̇`.
pub fn nullspace_joint_limit_task(
    model: &SerialManipulator,
    q: &JointConfig,
    n_matrix: &DMatrix<f64>,
    gain: f64,
) -> DVector<f64> {
    let factors = NFactors::new(n_matrix);
    &factors.nullspace_projector() * mid_range_gradient_descent(model, q, gain)
}

/// One velocity-resolution step: drives the spatial error to zero with
/// rate `lambda_e` through the damped pseudoinverse of the extended
/// Jacobian, adds the nullspace joint-limit task, and clips to the
/// per-joint velocity limit. With full task rank, no clipping and no
/// obstacle the closed loop contracts the error by `(1 − lambda_e·dt)` per
/// step.
pub fn control_step(
    model: &SerialManipulator,
    state: &ControlState,
    x_d: &UnitDualQuaternion,
    params: &ControllerParams,
) -> Result<DVector<f64>> {
    params.validate()?;
    let x_e = (state.x_m.conjugate() * *x_d).sign_normalized();
    let x_d_aligned = state.x_m * x_e;
    let error = (DualQuaternion::ONE - x_e.as_dual_quaternion()).vec8();

    let jacobian = model.pose_jacobian(&state.q)?;
    let n = extended_jacobian(&x_d_aligned, &jacobian);
    let factors = NFactors::new(&n);

    let mut qdot = factors.damped_solve(&(error * params.lambda_e), params.damping);
    if params.nullspace_gain != 0.0 && model.dof() > 1 {
        let task = mid_range_gradient_descent(model, &state.q, params.nullspace_gain);
        qdot += &factors.nullspace_projector() * task;
    }

    if params.qdot_max.is_finite() {
        for v in qdot.iter_mut() {
            *v = v.clamp(-params.qdot_max, params.qdot_max);
        }
    }
    Ok(qdot)
}

/// Projects the desired pose onto the constraint surface of an obstacle:
/// whenever the commanded relative translation points into the surface (or
/// the end effector is measured approaching it), its inward component
/// along the outward normal is removed while the relative rotation and any
/// outward retreat are kept; the commanded motion then never pushes into
/// the surface.
///
/// `eta` and `v_ee` are world-frame quantities; the relative translation
/// lives in the measured body frame, so the normal is rotated into that
/// frame before projecting.
pub fn obstacle_constrained_desired(
    x_m: &UnitDualQuaternion,
    x_d: &UnitDualQuaternion,
    v_ee: &Vector3<f64>,
    eta: &Vector3<f64>,
) -> Result<UnitDualQuaternion> {
    let norm = eta.norm();
    if norm < 1e-9 {
        return Err(Error::DegenerateGeometry("obstacle normal is zero".into()));
    }
    let eta_world = eta / norm;
    let eta_body = x_m.rotation().conjugate().rotate_vector(eta_world);

    let x_rel = (x_m.conjugate() * *x_d).sign_normalized();
    let p_rel = x_rel.translation().as_vector();
    let command_inward = p_rel.dot(&eta_body) < 0.0;
    let approaching = v_ee.dot(&eta_world) < 0.0;
    if !(command_inward || approaching) {
        return Ok(*x_d);
    }

    // remove only the inward component; outward retreat stays available
    let p_proj = p_rel - eta_body * p_rel.dot(&eta_body).min(0.0);
    Ok(*x_m
        * UnitDualQuaternion::from_rotation_translation(x_rel.rotation(), p_proj.into()))
}

/// Uninterpreted composition of the surface-constrained desired pose:
/// subtracts the ε-embedded half translation from the displacement log,
/// exponentiates, and adds the speed-scaled projected translation as a raw
/// dual-quaternion term. `eta` is read in the measured body frame here,
/// matching the original formulation. The result is generally not unit
/// norm; kept for comparison against `obstacle_constrained_desired`.
pub fn literal_obstacle_constrained_desired(
    x_m: &UnitDualQuaternion,
    x_d: &UnitDualQuaternion,
    v_ee: &Vector3<f64>,
    eta: &Vector3<f64>,
) -> DualQuaternion {
    let x_rel = (x_m.conjugate() * *x_d).sign_normalized();
    let half_p = x_rel.translation().as_vector() * 0.5;
    let y = x_rel.log()
        - DualQuaternion::new(Quaternion::ZERO, Quaternion::from_vector(half_p));
    let recomposed = x_m.as_dual_quaternion() * UnitDualQuaternion::exp(&y).as_dual_quaternion();
    let eta = eta.normalize();
    let projected = half_p - eta * half_p.dot(&eta);
    recomposed
        + DualQuaternion::new(Quaternion::ZERO, Quaternion::from_vector(projected))
            .scale(v_ee.norm())
}

/// Explicit Euler step `q + dt·q̇` clamped to the joint limits; the flag
/// reports whether any limit clipped the result.
pub fn integrate(
    model: &SerialManipulator,
    q: &JointConfig,
    qdot: &DVector<f64>,
    dt: f64,
) -> (JointConfig, bool) {
    let mut next = JointConfig(&q.0 + qdot * dt);
    let hit = model.clamp_to_limits(&mut next);
    (next, hit)
}
