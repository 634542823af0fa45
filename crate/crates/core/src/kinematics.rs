//! Serial-manipulator forward kinematics and the 8×n dual-quaternion pose
//! Jacobian. Chains are described by per-joint screw axes in the home
//! configuration (product-of-exponentials style); a DH converter is
//! provided for fixture authoring.

use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Deserialize;

use crate::dq::{DualQuaternion, Quaternion, UnitDualQuaternion};
use crate::error::{Error, Result};
use crate::formats;

/// Joint positions: radians for revolute joints, meters for prismatic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig(pub DVector<f64>);

impl JointConfig {
    pub fn from_slice(q: &[f64]) -> Self {
        JointConfig(DVector::from_column_slice(q))
    }

    pub fn zeros(dof: usize) -> Self {
        JointConfig(DVector::zeros(dof))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for JointConfig {
    type Target = DVector<f64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
}

/// One joint of the chain: a screw axis in the home configuration.
/// `point` is any point on the axis line (ignored for prismatic joints).
#[derive(Debug, Clone)]
pub struct Joint {
    pub joint_type: JointType,
    pub axis: Vector3<f64>,
    pub point: Vector3<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Joint {
    /// Tangent-space generator ŝ of the joint motion: `l + ε(c × l)` for a
    /// revolute axis through `c`, `ε·v` for a prismatic direction `v`.
    fn screw(&self) -> DualQuaternion {
        match self.joint_type {
            JointType::Revolute => DualQuaternion::new(
                Quaternion::from_vector(self.axis),
                Quaternion::from_vector(self.point.cross(&self.axis)),
            ),
            JointType::Prismatic => {
                DualQuaternion::new(Quaternion::ZERO, Quaternion::from_vector(self.axis))
            }
        }
    }

    /// Pose displacement produced by driving the joint to `q`.
    fn motion(&self, q: f64) -> UnitDualQuaternion {
        UnitDualQuaternion::exp(&self.screw().scale(q / 2.0))
    }

    pub fn mid_range(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A joint-parameterized kinematic chain with base pose and end-effector
/// offset. Immutable after construction; FK and Jacobian are pure.
#[derive(Debug, Clone)]
pub struct SerialManipulator {
    pub name: String,
    pub joints: Vec<Joint>,
    pub base: UnitDualQuaternion,
    pub ee_offset: UnitDualQuaternion,
}

impl SerialManipulator {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        base: UnitDualQuaternion,
        ee_offset: UnitDualQuaternion,
    ) -> Result<Self> {
        let name = name.into();
        if joints.is_empty() {
            return Err(Error::InvalidInput(format!("robot {name:?} has no joints")));
        }
        let mut normalized = joints;
        for (i, joint) in normalized.iter_mut().enumerate() {
            let n = joint.axis.norm();
            if n < 1e-12 {
                return Err(Error::InvalidInput(format!("joint {i} has a zero axis")));
            }
            joint.axis /= n;
            if joint.lower >= joint.upper {
                return Err(Error::InvalidInput(format!(
                    "joint {i} limits are inconsistent: lower {} >= upper {}",
                    joint.lower, joint.upper
                )));
            }
        }
        Ok(SerialManipulator { name, joints: normalized, base, ee_offset })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    fn check_dim(&self, q: &JointConfig) -> Result<()> {
        if q.dim() != self.dof() {
            return Err(Error::DimensionMismatch { expected: self.dof(), got: q.dim() });
        }
        Ok(())
    }

    /// End-effector pose in the base frame:
    /// `base · x₁(q₁) ··· xₙ(qₙ) · ee_offset`.
    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<UnitDualQuaternion> {
        self.check_dim(q)?;
        let mut x = self.base;
        for (joint, qi) in self.joints.iter().zip(q.iter()) {
            x = x * joint.motion(*qi);
        }
        x = x * self.ee_offset;
        Ok(UnitDualQuaternion::new_normalize(x.as_dual_quaternion()))
    }

    /// 8×n pose Jacobian: vec(ẋ) = J·q̇. Column j is the analytic chain-rule
    /// derivative `prefix_j · (ŝ_j/2) · suffix_j` of the dual-quaternion
    /// product.
    pub fn pose_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        self.check_dim(q)?;
        let n = self.dof();

        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(self.base);
        for (joint, qi) in self.joints.iter().zip(q.iter()) {
            let last = *prefix.last().unwrap();
            prefix.push(last * joint.motion(*qi));
        }

        let mut suffix = vec![self.ee_offset; n + 1];
        for j in (0..n).rev() {
            suffix[j] = self.joints[j].motion(q[j]) * suffix[j + 1];
        }

        let mut jac = DMatrix::zeros(8, n);
        for j in 0..n {
            let col = prefix[j].as_dual_quaternion()
                * self.joints[j].screw().scale(0.5)
                * suffix[j].as_dual_quaternion();
            jac.column_mut(j).copy_from_slice(col.vec8().as_slice());
        }
        Ok(jac)
    }

    /// Clamps a configuration to the joint limits; returns whether any
    /// joint was clamped.
    pub fn clamp_to_limits(&self, q: &mut JointConfig) -> bool {
        let mut hit = false;
        for (i, joint) in self.joints.iter().enumerate() {
            let v = q.0[i];
            let clamped = v.clamp(joint.lower, joint.upper);
            if clamped != v {
                q.0[i] = clamped;
                hit = true;
            }
        }
        hit
    }

    /// Uniformly random configuration within a centered `fraction` of each
    /// joint range.
    pub fn sample_config<R: rand::Rng>(&self, rng: &mut R, fraction: f64) -> JointConfig {
        let q: Vec<f64> = self
            .joints
            .iter()
            .map(|j| {
                let half = 0.5 * fraction * j.range();
                rng.gen_range(j.mid_range() - half..=j.mid_range() + half)
            })
            .collect();
        JointConfig::from_slice(&q)
    }

    pub fn from_toml_str(content: &str) -> Result<Self> {
        let file: RobotFile = toml::from_str(content)
            .map_err(|e| Error::parse("robot model", e.to_string()))?;
        file.build()
    }

    /// Loads a robot model file (structured text, see `models/` for the
    /// documented schema).
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// One of the repository models: "planar2", "planar3" or "spatial7".
    pub fn bundled(name: &str) -> Result<Self> {
        let content = match name {
            "planar2" => include_str!("../models/planar2.toml"),
            "planar3" => include_str!("../models/planar3.toml"),
            "spatial7" => include_str!("../models/spatial7.toml"),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown bundled robot {other:?} (expected planar2, planar3 or spatial7)"
                )))
            }
        };
        Self::from_toml_str(content)
    }

    /// Resolves a robot argument: bundled name or path to a model file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "planar2" | "planar3" | "spatial7" => Self::bundled(spec),
            path => Self::load(Path::new(path)),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RobotFile {
    name: String,
    dof: usize,
    base: Option<Vec<f64>>,
    ee_offset: Option<Vec<f64>>,
    #[serde(rename = "joint", default)]
    joints: Vec<JointRecord>,
}

#[derive(Debug, Deserialize)]
struct JointRecord {
    #[serde(rename = "type")]
    joint_type: String,
    axis: [f64; 3],
    #[serde(default)]
    point: [f64; 3],
    limits: [f64; 2],
}

impl RobotFile {
    fn build(self) -> Result<SerialManipulator> {
        if self.joints.len() != self.dof {
            return Err(Error::parse(
                "robot model",
                format!("dof = {} but {} joint records given", self.dof, self.joints.len()),
            ));
        }
        let parse_pose = |vals: &Option<Vec<f64>>, what: &str| -> Result<UnitDualQuaternion> {
            match vals {
                None => Ok(UnitDualQuaternion::IDENTITY),
                Some(v) => formats::pose_from_scalars(v)
                    .map_err(|e| Error::parse(format!("robot model {what}"), e.to_string())),
            }
        };
        let base = parse_pose(&self.base, "base")?;
        let ee_offset = parse_pose(&self.ee_offset, "ee_offset")?;
        let joints = self
            .joints
            .into_iter()
            .map(|j| {
                let joint_type = match j.joint_type.as_str() {
                    "revolute" => Ok(JointType::Revolute),
                    "prismatic" => Ok(JointType::Prismatic),
                    other => Err(Error::parse(
                        "robot model",
                        format!("unknown joint type {other:?}"),
                    )),
                }?;
                Ok(Joint {
                    joint_type,
                    axis: Vector3::from(j.axis),
                    point: Vector3::from(j.point),
                    lower: j.limits[0],
                    upper: j.limits[1],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SerialManipulator::new(self.name, joints, base, ee_offset)
    }
}

/// One row of a classic Denavit-Hartenberg table.
#[derive(Debug, Clone, Copy)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta: f64,
    pub joint_type: JointType,
    pub lower: f64,
    pub upper: f64,
}

/// Converts a classic DH table into the screw-axis chain description used
/// here: each joint's axis is the z-axis of the preceding DH frame at the
/// home configuration and the accumulated home transform becomes the
/// end-effector offset.
pub fn from_dh(name: impl Into<String>, rows: &[DhRow], base: UnitDualQuaternion) -> Result<SerialManipulator> {
    let mut joints = Vec::with_capacity(rows.len());
    let mut frame = UnitDualQuaternion::IDENTITY;
    for row in rows {
        let z = frame.rotation().rotate_vector(Vector3::z());
        let origin = frame.translation().as_vector();
        joints.push(Joint {
            joint_type: row.joint_type,
            axis: z,
            point: origin,
            lower: row.lower,
            upper: row.upper,
        });
        frame = frame * dh_transform(row);
    }
    SerialManipulator::new(name, joints, base, frame)
}

/// Rz(θ)·Tz(d)·Tx(a)·Rx(α) at the home value of the joint variable.
fn dh_transform(row: &DhRow) -> UnitDualQuaternion {
    use crate::dq::{PureQuaternion, UnitQuaternion};
    let rot_z = UnitDualQuaternion::from_rotation_translation(
        UnitQuaternion::from_axis_angle(Vector3::z(), row.theta),
        PureQuaternion::ZERO,
    );
    let trans_z = UnitDualQuaternion::from_translation(PureQuaternion::new(0.0, 0.0, row.d));
    let trans_x = UnitDualQuaternion::from_translation(PureQuaternion::new(row.a, 0.0, 0.0));
    let rot_x = UnitDualQuaternion::from_rotation_translation(
        UnitQuaternion::from_axis_angle(Vector3::x(), row.alpha),
        PureQuaternion::ZERO,
    );
    rot_z * trans_z * trans_x * rot_x
}
