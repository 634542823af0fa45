//! Reactive obstacle avoidance: detection shells around spherical
//! obstacles, tangent-plane escape trees grown greedily toward the goal,
//! and Cartesian shifting of final-path key poses along the selected
//! escape polyline.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::Rng;
use serde::Deserialize;

use crate::dq::UnitDualQuaternion;
use crate::error::{Error, Result};
use crate::planner::PosePath;

/// Alignment threshold above which the x̂ reference axis is replaced by ŷ
/// when constructing the in-plane basis.
const AXIS_FALLBACK_DOT: f64 = 0.99;

/// A spherical obstacle wrapped by a detection shell; entering the shell
/// triggers avoidance.
#[derive(Debug, Clone)]
pub struct SphereObstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub shell_radius: f64,
    /// Simulation step at which the obstacle appears.
    pub activation_step: usize,
}

impl SphereObstacle {
    /// Obstacle with the default shell of 1.5 × radius, active from step 0.
    pub fn new(center: Vector3<f64>, radius: f64) -> Self {
        SphereObstacle { center, radius, shell_radius: 1.5 * radius, activation_step: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "obstacle radius must be positive, got {}",
                self.radius
            )));
        }
        if self.shell_radius <= self.radius {
            return Err(Error::InvalidInput(format!(
                "shell radius {} must exceed the obstacle radius {}",
                self.shell_radius, self.radius
            )));
        }
        Ok(())
    }

    pub fn active_at(&self, step: usize) -> bool {
        step >= self.activation_step
    }

    /// Distance from a point to the obstacle surface (negative inside).
    pub fn surface_distance(&self, position: &Vector3<f64>) -> f64 {
        (position - self.center).norm() - self.radius
    }
}

/// The set of obstacles in a run; obstacles may appear at later steps.
#[derive(Debug, Clone, Default)]
pub struct ObstacleScene {
    pub obstacles: Vec<SphereObstacle>,
}

impl ObstacleScene {
    pub fn empty() -> Self {
        ObstacleScene { obstacles: Vec::new() }
    }

    pub fn new(obstacles: Vec<SphereObstacle>) -> Result<Self> {
        let scene = ObstacleScene { obstacles };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn active(&self, step: usize) -> impl Iterator<Item = &SphereObstacle> {
        self.obstacles.iter().filter(move |o| o.active_at(step))
    }

    pub fn from_toml_str(content: &str) -> Result<Self> {
        let file: SceneFile =
            toml::from_str(content).map_err(|e| Error::parse("scene file", e.to_string()))?;
        let obstacles = file
            .obstacles
            .into_iter()
            .map(|r| {
                let mut o = SphereObstacle::new(Vector3::from(r.center), r.radius);
                if let Some(shell) = r.shell_radius {
                    o.shell_radius = shell;
                }
                o.activation_step = r.activation_step;
                o
            })
            .collect();
        Self::new(obstacles)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Smallest surface distance over the obstacles active at `step`;
    /// `None` for an empty scene.
    pub fn min_clearance(&self, position: &Vector3<f64>, step: usize) -> Option<f64> {
        self.active(step)
            .map(|o| o.surface_distance(position))
            .min_by(|a, b| a.total_cmp(b))
    }
}

#[derive(Debug, Deserialize)]
struct SceneFile {
    #[serde(rename = "obstacle", default)]
    obstacles: Vec<ObstacleRecord>,
}

#[derive(Debug, Deserialize)]
struct ObstacleRecord {
    center: [f64; 3],
    radius: f64,
    shell_radius: Option<f64>,
    #[serde(default)]
    activation_step: usize,
}

/// The obstacle active at `step` whose surface is nearest to `position`,
/// together with the surface point along the center-to-position ray.
/// Ties keep the lower-index obstacle.
pub fn closest_obstacle<'a>(
    scene: &'a ObstacleScene,
    position: &Vector3<f64>,
    step: usize,
) -> Option<(&'a SphereObstacle, Vector3<f64>)> {
    let mut best: Option<(&SphereObstacle, f64)> = None;
    for o in scene.active(step) {
        let d = o.surface_distance(position);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((o, d));
        }
    }
    best.map(|(o, _)| {
        let offset = position - o.center;
        let n = offset.norm();
        let dir = if n > 1e-300 { offset / n } else { Vector3::x() };
        (o, o.center + dir * o.radius)
    })
}

/// True iff the position is within the closed detection shell.
pub fn inside_detection_shell(position: &Vector3<f64>, obstacle: &SphereObstacle) -> bool {
    (position - obstacle.center).norm() <= obstacle.shell_radius
}

/// Outward unit normal of the obstacle at the radial projection of
/// `position`; errors at the center where the direction is undefined.
pub fn normal_vector(position: &Vector3<f64>, obstacle: &SphereObstacle) -> Result<Vector3<f64>> {
    let offset = position - obstacle.center;
    let n = offset.norm();
    if n < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "query position coincides with the obstacle center".into(),
        ));
    }
    Ok(offset / n)
}

/// A square exploration patch tangent to the obstacle at `root`, spanned
/// by the orthogonal in-plane vectors `v` and `u` of norm `k_eta / 2`.
#[derive(Debug, Clone)]
pub struct TangentPlane {
    pub root: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub v: Vector3<f64>,
    pub u: Vector3<f64>,
    pub k_eta: f64,
}

/// Builds the tangent plane at `root`: `v` from the reference-axis cross
/// product (x̂, falling back to ŷ near alignment), `u = η̂ × v`.
pub fn build_plane(
    root: &Vector3<f64>,
    k_eta: f64,
    obstacle: &SphereObstacle,
) -> Result<TangentPlane> {
    if !k_eta.is_finite() || k_eta <= 0.0 {
        return Err(Error::InvalidInput(format!("k_eta must be positive, got {k_eta}")));
    }
    let normal = normal_vector(root, obstacle)?;
    let reference = if normal.dot(&Vector3::x()).abs() > AXIS_FALLBACK_DOT {
        Vector3::y()
    } else {
        Vector3::x()
    };
    let dir = reference.cross(&normal);
    let n = dir.norm();
    if n < 1e-12 {
        return Err(Error::DegenerateGeometry("tangent basis collapsed".into()));
    }
    let v = dir * (k_eta / (2.0 * n));
    let u = normal.cross(&v);
    Ok(TangentPlane { root: *root, normal, v, u, k_eta })
}

/// The eight deterministic children of a plane: side points `root ± v`,
/// `root ± u` and corner points `root ± v ± u`.
pub fn candidate_points(plane: &TangentPlane) -> [Vector3<f64>; 8] {
    let r = plane.root;
    [
        r + plane.v,
        r - plane.v,
        r + plane.u,
        r - plane.u,
        r + plane.v + plane.u,
        r + plane.v - plane.u,
        r - plane.v + plane.u,
        r - plane.v - plane.u,
    ]
}

/// Smallest distance from the segment `[p0, p1]` to `point`.
pub fn segment_point_distance(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    point: &Vector3<f64>,
) -> f64 {
    let d = p1 - p0;
    let len2 = d.norm_squared();
    if len2 < 1e-300 {
        return (point - p0).norm();
    }
    let t = ((point - p0).dot(&d) / len2).clamp(0.0, 1.0);
    (point - (p0 + d * t)).norm()
}

/// True iff the segment penetrates any obstacle active at `step`
/// (minimum distance to a center strictly below that obstacle's radius;
/// the end effector is modeled as a point).
pub fn segment_collides(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    scene: &ObstacleScene,
    step: usize,
) -> bool {
    scene
        .active(step)
        .any(|o| segment_point_distance(p0, p1, &o.center) < o.radius)
}

/// Segment collision test against radii inflated by `margin_frac` of each
/// obstacle's shell gap; the escape search uses this so the executed path
/// keeps positive clearance even with interpolation bowing and tracking
/// error.
fn segment_collides_inflated(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    scene: &ObstacleScene,
    step: usize,
    margin_frac: f64,
) -> bool {
    scene.active(step).any(|o| {
        let inflated = o.radius + margin_frac * (o.shell_radius - o.radius);
        segment_point_distance(p0, p1, &o.center) < inflated
    })
}

/// Escape-tree search parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RepetParams {
    /// Plane diagonal length; `None` uses the triggering obstacle's shell
    /// radius.
    pub k_eta: Option<f64>,
    pub max_depth: usize,
    /// Multiplier applied to `k_eta` on each resample round.
    pub resample_growth: f64,
    pub max_resamples: usize,
    /// Children per plane on randomized resample rounds (the first round
    /// uses the eight deterministic side/corner points).
    pub branching: usize,
    /// Fraction of (shell − radius) added to obstacle radii during the
    /// search.
    pub search_margin: f64,
}

impl Default for RepetParams {
    fn default() -> Self {
        RepetParams {
            k_eta: None,
            max_depth: 5,
            resample_growth: 2.0,
            max_resamples: 3,
            branching: 8,
            search_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EscapeNode {
    pub position: Vector3<f64>,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Record of the explored tree, for diagnostics and invariant checks.
#[derive(Debug, Clone)]
pub struct EscapeTree {
    pub nodes: Vec<EscapeNode>,
    pub k_eta: f64,
    pub max_depth: usize,
    pub branching: usize,
}

/// Result of an escape search: the collision-free waypoint polyline
/// (starting at the query position) and the reconnection target.
#[derive(Debug, Clone)]
pub struct EscapePath {
    pub waypoints: Vec<Vector3<f64>>,
    pub reconnect: Vector3<f64>,
    /// Index into the reconnection candidate list, `None` when the goal
    /// fallback was used.
    pub reconnect_index: Option<usize>,
    pub tree: EscapeTree,
    pub levels_expanded: usize,
    pub level_times: Vec<Duration>,
}

impl EscapePath {
    /// Full polyline including the reconnection point.
    pub fn polyline(&self) -> Vec<Vector3<f64>> {
        let mut pts = self.waypoints.clone();
        pts.push(self.reconnect);
        pts
    }
}

struct ConnectedLeaf {
    child: Vector3<f64>,
    index: Option<usize>,
    reconnect: Vector3<f64>,
    cost: f64,
}

/// Grows an escape tree from the current pose around the triggering
/// obstacle. Each level builds a tangent plane at the current root,
/// filters its children by segment collision, and re-roots at the child
/// nearest the goal; the search ends as soon as some waypoint sees a
/// collision-free straight segment to a reconnection candidate (tried in
/// order, with `goal_position` as the final fallback). Exhausting
/// `max_depth` triggers a resample round with enlarged `k_eta` and
/// randomized in-plane children.
#[allow(clippy::too_many_arguments)]
pub fn escape_tree<R: Rng>(
    x_c: &UnitDualQuaternion,
    goal_position: &Vector3<f64>,
    reconnect_candidates: &[Vector3<f64>],
    obstacle: &SphereObstacle,
    scene: &ObstacleScene,
    step: usize,
    params: &RepetParams,
    rng: &mut R,
) -> Result<EscapePath> {
    let root = x_c.translation().as_vector();
    if !inside_detection_shell(&root, obstacle) {
        return Err(Error::InvalidInput(
            "escape search requires the current position inside the detection shell".into(),
        ));
    }

    let margin = params.search_margin;
    let try_connect = |p: &Vector3<f64>| -> Option<(Option<usize>, Vector3<f64>)> {
        for (i, c) in reconnect_candidates.iter().enumerate() {
            if !segment_collides_inflated(p, c, scene, step, margin) {
                return Some((Some(i), *c));
            }
        }
        if !segment_collides_inflated(p, goal_position, scene, step, margin) {
            return Some((None, *goal_position));
        }
        None
    };

    let mut tree = EscapeTree {
        nodes: vec![EscapeNode { position: root, parent: None, depth: 0 }],
        k_eta: params.k_eta.unwrap_or(obstacle.shell_radius),
        max_depth: params.max_depth,
        branching: params.branching,
    };
    let mut levels_expanded = 0usize;
    let mut level_times = Vec::new();

    // Depth-0 early exit: the current position may already see a free
    // segment to a reconnection point.
    if let Some((idx, reconnect)) = try_connect(&root) {
        return Ok(EscapePath {
            waypoints: vec![root],
            reconnect,
            reconnect_index: idx,
            tree,
            levels_expanded,
            level_times,
        });
    }

    let mut k = params.k_eta.unwrap_or(obstacle.shell_radius);
    for round in 0..=params.max_resamples {
        tree.k_eta = k;
        let mut current = root;
        let mut current_node = 0usize;
        let mut waypoints = vec![root];

        for depth in 1..=params.max_depth {
            let t0 = Instant::now();
            let plane = build_plane(&current, k, obstacle)?;
            let children: Vec<Vector3<f64>> = if round == 0 {
                candidate_points(&plane).to_vec()
            } else {
                (0..params.branching)
                    .map(|_| {
                        let a: f64 = rng.gen_range(-1.0..1.0);
                        let b: f64 = rng.gen_range(-1.0..1.0);
                        plane.root + plane.v * a + plane.u * b
                    })
                    .collect()
            };

            let mut connected: Option<ConnectedLeaf> = None;
            let mut best_child: Option<(Vector3<f64>, f64)> = None;
            for child in children {
                if segment_collides_inflated(&current, &child, scene, step, margin) {
                    continue;
                }
                tree.nodes.push(EscapeNode {
                    position: child,
                    parent: Some(current_node),
                    depth,
                });
                let cost = (child - goal_position).norm();
                if let Some((idx, rc)) = try_connect(&child) {
                    if connected.as_ref().is_none_or(|c| cost < c.cost) {
                        connected = Some(ConnectedLeaf { child, index: idx, reconnect: rc, cost });
                    }
                }
                if best_child.as_ref().is_none_or(|(_, c)| cost < *c) {
                    best_child = Some((child, cost));
                }
            }
            levels_expanded += 1;
            level_times.push(t0.elapsed());

            if let Some(leaf) = connected {
                waypoints.push(leaf.child);
                return Ok(EscapePath {
                    waypoints,
                    reconnect: leaf.reconnect,
                    reconnect_index: leaf.index,
                    tree,
                    levels_expanded,
                    level_times,
                });
            }
            match best_child {
                Some((child, _)) => {
                    waypoints.push(child);
                    current = child;
                    current_node = tree.nodes.len() - 1;
                }
                None => break, // every child blocked: resample with larger plane
            }
        }
        k *= params.resample_growth;
    }

    Err(Error::AvoidanceFailure(format!(
        "escape search exhausted {} resample rounds around the obstacle at {:?}",
        params.max_resamples, obstacle.center
    )))
}

/// Normalized arc-length fractions of a polyline's vertices (0 at the
/// first vertex, 1 at the last; index-based for zero-length polylines).
pub fn polyline_arc_fractions(points: &[Vector3<f64>]) -> Vec<f64> {
    let lengths = arc_lengths(points);
    let total = *lengths.last().unwrap_or(&0.0);
    if total < 1e-12 {
        let m = points.len().max(2);
        return (0..points.len()).map(|k| k as f64 / (m - 1) as f64).collect();
    }
    lengths.iter().map(|s| s / total).collect()
}

/// Cumulative arc lengths of a polyline (first entry 0).
fn arc_lengths(points: &[Vector3<f64>]) -> Vec<f64> {
    let mut s = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    s.push(0.0);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        s.push(acc);
    }
    s
}

/// Point at arc length `s` along a polyline.
fn polyline_point(points: &[Vector3<f64>], lengths: &[f64], s: f64) -> Vector3<f64> {
    let total = *lengths.last().unwrap();
    let s = s.clamp(0.0, total);
    for i in 1..points.len() {
        if s <= lengths[i] || i == points.len() - 1 {
            let seg = lengths[i] - lengths[i - 1];
            let t = if seg > 1e-300 { (s - lengths[i - 1]) / seg } else { 0.0 };
            return points[i - 1] + (points[i] - points[i - 1]) * t.clamp(0.0, 1.0);
        }
    }
    *points.last().unwrap()
}

/// Replaces the translations of the segment's key poses with arc-length
/// matched points along the waypoint polyline, keeping every orientation
/// from the original interpolation. Empty waypoint lists leave the segment
/// unchanged.
pub fn shift_final_path(fp_segment: &PosePath, waypoints: &[Vector3<f64>]) -> PosePath {
    if waypoints.is_empty() {
        return fp_segment.clone();
    }
    assert!(
        waypoints.len() <= fp_segment.len(),
        "waypoint count {} exceeds segment pose count {}",
        waypoints.len(),
        fp_segment.len()
    );

    let originals: Vec<Vector3<f64>> =
        fp_segment.iter().map(|p| p.translation().as_vector()).collect();
    let source_lengths = arc_lengths(&originals);
    let source_total = *source_lengths.last().unwrap();
    let target_lengths = arc_lengths(waypoints);
    let target_total = *target_lengths.last().unwrap();

    let m = fp_segment.len();
    let poses = fp_segment
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let fraction = if source_total > 1e-12 {
                source_lengths[i] / source_total
            } else {
                i as f64 / (m - 1) as f64
            };
            let t = polyline_point(waypoints, &target_lengths, fraction * target_total);
            UnitDualQuaternion::from_rotation_translation(pose.rotation(), t.into())
        })
        .collect();
    PosePath::new(fp_segment.kind(), poses).expect("shift preserves path length")
}

/// Brute-force clearance audit: densely samples a polyline at `resolution`
/// spacing and reports the smallest surface distance to any obstacle
/// active at `step`. `None` for an empty scene.
pub fn polyline_min_clearance(
    points: &[Vector3<f64>],
    scene: &ObstacleScene,
    step: usize,
    resolution: f64,
) -> Option<f64> {
    if scene.active(step).next().is_none() || points.is_empty() {
        return None;
    }
    let mut min = f64::INFINITY;
    let mut check = |p: &Vector3<f64>| {
        if let Some(c) = scene.min_clearance(p, step) {
            min = min.min(c);
        }
    };
    check(&points[0]);
    for w in points.windows(2) {
        let len = (w[1] - w[0]).norm();
        let steps = (len / resolution).ceil().max(1.0) as usize;
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            check(&(w[0] + (w[1] - w[0]) * t));
        }
    }
    Some(min)
}
