//! Shared text formats: pose lines (8- or 7-scalar), demonstration files
//! and float formatting for byte-stable output.

use std::path::Path;

use crate::dq::{pose_distance, DualQuaternion, PureQuaternion, Quaternion, UnitDualQuaternion, UnitQuaternion};
use crate::error::{Error, Result};

/// Norm tolerance accepted when reading poses from text; values are
/// renormalized exactly after validation.
pub const POSE_PARSE_TOL: f64 = 1e-6;

/// Vec-distance below which consecutive demonstration poses are collapsed
/// as duplicates (kinesthetic recordings contain dwell segments).
pub const DUPLICATE_POSE_TOL: f64 = 1e-10;

/// Splits a line into floats on whitespace and/or commas.
pub fn parse_scalars(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::parse("scalar list", format!("bad float {t:?}: {e}")))
        })
        .collect()
}

/// Builds a pose from either the 8-scalar dual-quaternion form
/// (pw, px, py, pz, dw, dx, dy, dz) or the 7-scalar form
/// (tx, ty, tz, qw, qx, qy, qz).
pub fn pose_from_scalars(vals: &[f64]) -> Result<UnitDualQuaternion> {
    match vals.len() {
        8 => {
            let dq = DualQuaternion::new(
                Quaternion::new(vals[0], vals[1], vals[2], vals[3]),
                Quaternion::new(vals[4], vals[5], vals[6], vals[7]),
            );
            UnitDualQuaternion::try_new(dq, POSE_PARSE_TOL)
        }
        7 => {
            let p = PureQuaternion::new(vals[0], vals[1], vals[2]);
            let r = UnitQuaternion::try_new(
                Quaternion::new(vals[3], vals[4], vals[5], vals[6]),
                POSE_PARSE_TOL,
            )?;
            Ok(UnitDualQuaternion::from_rotation_translation(r, p))
        }
        n => Err(Error::parse(
            "pose",
            format!("expected 8 or 7 scalars, got {n}"),
        )),
    }
}

pub fn parse_pose_line(line: &str) -> Result<UnitDualQuaternion> {
    pose_from_scalars(&parse_scalars(line)?)
}

/// Formats a float with 17 significant digits, enough for bit-stable f64
/// round trips.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a pose as 8 space-separated scalars in the canonical order.
pub fn format_pose(x: &UnitDualQuaternion) -> String {
    let v = x.vec8();
    (0..8).map(|i| format_f64(v[i])).collect::<Vec<_>>().join(" ")
}

/// Collapses consecutive near-duplicate poses.
pub fn collapse_duplicates(poses: &[UnitDualQuaternion]) -> Vec<UnitDualQuaternion> {
    let mut out: Vec<UnitDualQuaternion> = Vec::with_capacity(poses.len());
    for pose in poses {
        if let Some(last) = out.last() {
            if pose_distance(last, pose) < DUPLICATE_POSE_TOL {
                continue;
            }
        }
        out.push(*pose);
    }
    out
}

/// Reads a demonstration file: one pose per line (8- or 7-scalar form),
/// `#` comment lines and blank lines ignored, consecutive duplicates
/// collapsed.
pub fn read_demo_str(content: &str) -> Result<Vec<UnitDualQuaternion>> {
    let mut poses = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pose = parse_pose_line(line)
            .map_err(|e| Error::parse(format!("demo line {}", idx + 1), e.to_string()))?;
        poses.push(pose);
    }
    Ok(collapse_duplicates(&poses))
}

pub fn read_demo_file(path: &Path) -> Result<Vec<UnitDualQuaternion>> {
    read_demo_str(&std::fs::read_to_string(path)?)
}

pub fn write_demo_file(path: &Path, poses: &[UnitDualQuaternion]) -> Result<()> {
    let mut out = String::from("# demonstration: one pose per line (pw px py pz dw dx dy dz)\n");
    for pose in poses {
        out.push_str(&format_pose(pose));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
