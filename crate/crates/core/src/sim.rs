//! Simulation harness: closes the planning loop (pursuit → escape-tree
//! avoidance → controller → simulated kinematics), loads and saves the
//! file formats, records per-step trajectories and metrics, and emits
//! plot data.

use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::avoidance::{
    closest_obstacle, escape_tree, inside_detection_shell, normal_vector, shift_final_path,
    ObstacleScene, RepetParams,
};
use crate::control::{
    control_step, integrate, obstacle_constrained_desired, ControlState, ControllerParams,
};
use crate::dq::UnitDualQuaternion;
use crate::error::{Error, Result};
use crate::formats;
use crate::kinematics::{JointConfig, SerialManipulator};
use crate::planner::{
    goal_error, imitated_path, relative_transforms, select_guiding_pose, target_pose, PathKind,
    PlannerParams, PosePath,
};

/// How the executor tracks each commanded target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// A fixed number of controller substeps per planner iteration.
    Fixed,
    /// Drive until the tracking error falls below `track_tolerance`.
    Converge,
}

/// Harness-level parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub tracking: TrackingMode,
    /// Controller substeps per planner iteration in `Fixed` mode.
    pub inner_steps: usize,
    /// Vec-error tolerance of `Converge` tracking (also used for avoidance
    /// key poses and start-pose seeking).
    pub track_tolerance: f64,
    /// Substep budget for one `Converge` target.
    pub max_track_steps: usize,
    /// Standard deviation of optional Gaussian measurement noise on the
    /// measured translation (meters); zero disables it.
    pub noise_std: f64,
    /// Cap on shell-triggered avoidance episodes per run.
    pub max_avoidance_events: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            tracking: TrackingMode::Fixed,
            inner_steps: 10,
            track_tolerance: 1e-5,
            max_track_steps: 50_000,
            noise_std: 0.0,
            max_avoidance_events: 50,
        }
    }
}

/// Executes commanded task-space targets, reporting the pose actually
/// reached. The harness is generic over this so the planning stack can run
/// both open loop and through the controller.
pub trait StepExecutor {
    fn measured(&self) -> UnitDualQuaternion;
    fn joint_config(&self) -> Option<JointConfig>;
    /// Advances one planner step toward the target.
    fn step_toward(
        &mut self,
        target: &UnitDualQuaternion,
        scene: &ObstacleScene,
        step: usize,
    ) -> Result<()>;
    /// Drives toward the target until within `tol`; returns whether the
    /// tolerance was met inside the budget.
    fn converge_to(
        &mut self,
        target: &UnitDualQuaternion,
        scene: &ObstacleScene,
        step: usize,
        tol: f64,
        max_steps: usize,
    ) -> Result<bool>;
}

/// Open-loop executor: every target is reached exactly.
#[derive(Debug, Clone)]
pub struct IdealExecutor {
    pose: UnitDualQuaternion,
}

impl IdealExecutor {
    pub fn new(start: UnitDualQuaternion) -> Self {
        IdealExecutor { pose: start }
    }
}

impl StepExecutor for IdealExecutor {
    fn measured(&self) -> UnitDualQuaternion {
        self.pose
    }

    fn joint_config(&self) -> Option<JointConfig> {
        None
    }

    fn step_toward(
        &mut self,
        target: &UnitDualQuaternion,
        _scene: &ObstacleScene,
        _step: usize,
    ) -> Result<()> {
        self.pose = *target;
        Ok(())
    }

    fn converge_to(
        &mut self,
        target: &UnitDualQuaternion,
        _scene: &ObstacleScene,
        _step: usize,
        _tol: f64,
        _max_steps: usize,
    ) -> Result<bool> {
        self.pose = *target;
        Ok(true)
    }
}

/// Closed-loop executor: velocity-resolved control over pure simulated
/// kinematics, with the obstacle-surface safety layer applied inside every
/// substep while the measured pose is inside a detection shell.
pub struct ControllerExecutor<'a> {
    model: &'a SerialManipulator,
    state: ControlState,
    controller: ControllerParams,
    sim: SimParams,
    noise_rng: ChaCha8Rng,
}

impl<'a> ControllerExecutor<'a> {
    pub fn new(
        model: &'a SerialManipulator,
        q0: JointConfig,
        controller: ControllerParams,
        sim: SimParams,
        seed: u64,
    ) -> Result<Self> {
        let state = ControlState::from_config(model, q0)?;
        Ok(ControllerExecutor {
            model,
            state,
            controller,
            sim,
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973),
        })
    }

    pub fn state(&self) -> &ControlState {
        &self.state
    }

    fn measured_with_noise(&mut self) -> UnitDualQuaternion {
        if self.sim.noise_std == 0.0 {
            return self.state.x_m;
        }
        // Box-Muller pairs for an isotropic translation perturbation
        let mut gauss = || {
            let u1: f64 = self.noise_rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = self.noise_rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        };
        let p = self.state.x_m.translation().as_vector()
            + Vector3::new(gauss(), gauss(), gauss()) * self.sim.noise_std;
        UnitDualQuaternion::from_rotation_translation(self.state.x_m.rotation(), p.into())
    }

    fn substep(
        &mut self,
        target: &UnitDualQuaternion,
        scene: &ObstacleScene,
        step: usize,
    ) -> Result<()> {
        let x_meas = self.measured_with_noise();
        let position = x_meas.translation().as_vector();

        // safety layer: project the command onto the constraint surface of
        // the nearest obstacle whose shell we are inside
        let mut command = *target;
        if let Some((obstacle, _)) = closest_obstacle(scene, &position, step) {
            if inside_detection_shell(&position, obstacle) {
                if let Ok(eta) = normal_vector(&position, obstacle) {
                    command =
                        obstacle_constrained_desired(&x_meas, target, &self.state.v_ee, &eta)?;
                }
            }
        }

        let control_view = ControlState {
            q: self.state.q.clone(),
            x_m: x_meas,
            v_ee: self.state.v_ee,
        };
        let qdot = control_step(self.model, &control_view, &command, &self.controller)?;
        let (q_next, _) = integrate(self.model, &self.state.q, &qdot, self.controller.dt);
        let x_next = self.model.forward_kinematics(&q_next)?;
        self.state.v_ee = (x_next.translation().as_vector()
            - self.state.x_m.translation().as_vector())
            / self.controller.dt;
        self.state.q = q_next;
        self.state.x_m = x_next;
        Ok(())
    }
}

impl StepExecutor for ControllerExecutor<'_> {
    fn measured(&self) -> UnitDualQuaternion {
        self.state.x_m
    }

    fn joint_config(&self) -> Option<JointConfig> {
        Some(self.state.q.clone())
    }

    fn step_toward(
        &mut self,
        target: &UnitDualQuaternion,
        scene: &ObstacleScene,
        step: usize,
    ) -> Result<()> {
        match self.sim.tracking {
            TrackingMode::Fixed => {
                for _ in 0..self.sim.inner_steps {
                    self.substep(target, scene, step)?;
                }
                Ok(())
            }
            TrackingMode::Converge => {
                let tol = self.sim.track_tolerance;
                let max = self.sim.max_track_steps;
                self.converge_to(target, scene, step, tol, max).map(|_| ())
            }
        }
    }

    fn converge_to(
        &mut self,
        target: &UnitDualQuaternion,
        scene: &ObstacleScene,
        step: usize,
        tol: f64,
        max_steps: usize,
    ) -> Result<bool> {
        for _ in 0..max_steps {
            if goal_error(&self.state.x_m, target) <= tol {
                return Ok(true);
            }
            self.substep(target, scene, step)?;
        }
        Ok(goal_error(&self.state.x_m, target) <= tol)
    }
}

/// One recorded harness step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub q: Vec<f64>,
    pub x_m: UnitDualQuaternion,
    pub x_d: UnitDualQuaternion,
    pub goal_error: f64,
    pub min_clearance: Option<f64>,
    pub avoidance_active: bool,
}

/// Per-step log of a run; step indices are strictly increasing.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
}

impl TrajectoryRecord {
    pub fn csv_header(dof: usize) -> String {
        let mut cols = vec!["step".to_string(), "time".to_string()];
        cols.extend((0..dof).map(|i| format!("q{i}")));
        for prefix in ["xm", "xd"] {
            for part in ["pw", "px", "py", "pz", "dw", "dx", "dy", "dz"] {
                cols.push(format!("{prefix}_{part}"));
            }
        }
        cols.extend(["goal_error", "min_clearance", "avoidance_active"].map(str::to_string));
        cols.join(",")
    }

    pub fn to_csv(&self, dof: usize) -> String {
        let mut out = Self::csv_header(dof);
        out.push('\n');
        for s in &self.steps {
            let mut fields = vec![s.step.to_string(), formats::format_f64(s.time)];
            for i in 0..dof {
                fields.push(formats::format_f64(s.q.get(i).copied().unwrap_or(f64::NAN)));
            }
            for pose in [&s.x_m, &s.x_d] {
                let v = pose.vec8();
                fields.extend((0..8).map(|i| formats::format_f64(v[i])));
            }
            fields.push(formats::format_f64(s.goal_error));
            fields.push(s.min_clearance.map(formats::format_f64).unwrap_or_default());
            fields.push(if s.avoidance_active { "1" } else { "0" }.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Task-space translation arc length of the measured path.
    pub fn path_length(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| {
                (w[1].x_m.translation().as_vector() - w[0].x_m.translation().as_vector()).norm()
            })
            .sum()
    }

    pub fn min_clearance(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.min_clearance)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn measured_translations(&self) -> Vec<Vector3<f64>> {
        self.steps.iter().map(|s| s.x_m.translation().as_vector()).collect()
    }

    pub fn final_path(&self) -> Result<PosePath> {
        PosePath::new(PathKind::Final, self.steps.iter().map(|s| s.x_m).collect())
    }

    /// Parses a trajectory CSV written by `to_csv`; returns the record and
    /// the joint count it was written with.
    pub fn from_csv(content: &str) -> Result<(Self, usize)> {
        let mut lines = content.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("trajectory csv", "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        let dof = cols.iter().filter(|c| c.starts_with('q') && c[1..].parse::<usize>().is_ok()).count();
        let expected = 2 + dof + 16 + 3;
        if cols.len() != expected {
            return Err(Error::parse(
                "trajectory csv",
                format!("expected {expected} columns for {dof} joints, got {}", cols.len()),
            ));
        }
        let mut record = TrajectoryRecord::default();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected {
                return Err(Error::parse(
                    format!("trajectory csv line {}", ln + 2),
                    format!("expected {expected} fields, got {}", fields.len()),
                ));
            }
            let f = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::parse("trajectory csv", format!("bad float {s:?}: {e}")))
            };
            let step = fields[0]
                .parse::<usize>()
                .map_err(|e| Error::parse("trajectory csv", e.to_string()))?;
            let time = f(fields[1])?;
            let q = fields[2..2 + dof].iter().map(|s| f(s)).collect::<Result<Vec<_>>>()?;
            // validate but do not renormalize, so re-emission is exact
            let pose_at = |start: usize| -> Result<UnitDualQuaternion> {
                let vals =
                    fields[start..start + 8].iter().map(|s| f(s)).collect::<Result<Vec<_>>>()?;
                formats::pose_from_scalars(&vals)?;
                Ok(UnitDualQuaternion::new_unchecked(crate::dq::DualQuaternion::from_vec8(
                    &crate::dq::Vec8::from_column_slice(&vals),
                )))
            };
            let x_m = pose_at(2 + dof)?;
            let x_d = pose_at(2 + dof + 8)?;
            let goal_error = f(fields[2 + dof + 16])?;
            let clearance_field = fields[2 + dof + 17];
            let min_clearance =
                if clearance_field.is_empty() { None } else { Some(f(clearance_field)?) };
            let avoidance_active = fields[2 + dof + 18].trim() == "1";
            record.steps.push(StepRecord {
                step,
                time,
                q,
                x_m,
                x_d,
                goal_error,
                min_clearance,
                avoidance_active,
            });
        }
        Ok((record, dof))
    }
}

/// Terminal status of a run, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Success,
    NonConvergence { iterations: usize, residual: f64 },
    AvoidanceFailure { reason: String },
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::NonConvergence { .. } => 2,
            RunStatus::AvoidanceFailure { .. } => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Success => "success",
            RunStatus::NonConvergence { .. } => "non-convergence",
            RunStatus::AvoidanceFailure { .. } => "avoidance-failure",
        }
    }
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var =
        samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / samples.len() as f64;
    (mean, var.sqrt())
}

/// Summary metrics of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub final_goal_error: f64,
    pub path_length: f64,
    pub min_clearance: Option<f64>,
    pub planner_steps: usize,
    pub avoidance_events: usize,
    pub escape_levels: usize,
    pub mean_planner_step_ms: f64,
    pub std_planner_step_ms: f64,
    pub mean_escape_level_ms: f64,
    pub std_escape_level_ms: f64,
    pub config_sha256: String,
    pub seed: u64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("status: {}\n", self.status.label()));
        s.push_str(&format!("final_goal_error: {}\n", self.final_goal_error));
        s.push_str(&format!("path_length: {}\n", self.path_length));
        match self.min_clearance {
            Some(c) => s.push_str(&format!("min_clearance: {c}\n")),
            None => s.push_str("min_clearance: n/a\n"),
        }
        s.push_str(&format!("planner_steps: {}\n", self.planner_steps));
        s.push_str(&format!("avoidance_events: {}\n", self.avoidance_events));
        s.push_str(&format!("escape_levels: {}\n", self.escape_levels));
        s.push_str(&format!(
            "planner_step_ms: mean {} std {}\n",
            self.mean_planner_step_ms, self.std_planner_step_ms
        ));
        s.push_str(&format!(
            "escape_level_ms: mean {} std {}\n",
            self.mean_escape_level_ms, self.std_escape_level_ms
        ));
        s.push_str(&format!("config_sha256: {}\n", self.config_sha256));
        s.push_str(&format!("seed: {}\n", self.seed));
        s
    }
}

/// Everything a run produces; the trajectory is present even on failure.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub record: TrajectoryRecord,
    pub summary: RunSummary,
}

struct RunStats {
    planner_step_ms: Vec<f64>,
    escape_level_ms: Vec<f64>,
    avoidance_events: usize,
    seed: u64,
}

impl RunStats {
    fn finish(self, record: TrajectoryRecord, status: RunStatus) -> RunArtifacts {
        let (mean_ms, std_ms) = mean_std(&self.planner_step_ms);
        let (lvl_mean, lvl_std) = mean_std(&self.escape_level_ms);
        let final_goal_error =
            record.steps.last().map(|s| s.goal_error).unwrap_or(f64::INFINITY);
        let summary = RunSummary {
            status,
            final_goal_error,
            path_length: record.path_length(),
            min_clearance: record.min_clearance(),
            planner_steps: record.steps.len().saturating_sub(1),
            avoidance_events: self.avoidance_events,
            escape_levels: self.escape_level_ms.len(),
            mean_planner_step_ms: mean_ms,
            std_planner_step_ms: std_ms,
            mean_escape_level_ms: lvl_mean,
            std_escape_level_ms: lvl_std,
            config_sha256: String::new(),
            seed: self.seed,
        };
        RunArtifacts { record, summary }
    }
}

/// The reactive planning loop over an arbitrary executor: guided ScLERP
/// pursuit of the goal-retargeted demonstration, with shell-triggered
/// escape-tree deflection of the upcoming path segment.
#[allow(clippy::too_many_arguments)]
pub fn run_reactive<E: StepExecutor>(
    demo: &PosePath,
    goal: &UnitDualQuaternion,
    scene: &ObstacleScene,
    planner: &PlannerParams,
    repet: &RepetParams,
    sim: &SimParams,
    executor: &mut E,
    seed: u64,
) -> Result<RunArtifacts> {
    planner.validate()?;
    scene.validate()?;
    let deltas = relative_transforms(demo)?;
    let ip = imitated_path(&deltas, goal)?;
    let n = ip.len();
    let max_iterations = planner.resolved_max_iterations(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut record = TrajectoryRecord::default();
    let mut guiding_index = 0usize;
    let mut stats = RunStats {
        planner_step_ms: Vec::new(),
        escape_level_ms: Vec::new(),
        avoidance_events: 0,
        seed,
    };
    let mut step = 0usize;

    fn push_record<E: StepExecutor>(
        executor: &E,
        record: &mut TrajectoryRecord,
        scene: &ObstacleScene,
        goal: &UnitDualQuaternion,
        step: usize,
        x_d: &UnitDualQuaternion,
        avoidance: bool,
    ) {
        let x_m = executor.measured();
        let position = x_m.translation().as_vector();
        record.steps.push(StepRecord {
            step,
            time: step as f64,
            q: executor
                .joint_config()
                .map(|q| q.as_slice().to_vec())
                .unwrap_or_default(),
            x_m,
            x_d: *x_d,
            goal_error: goal_error(&x_m, goal),
            min_clearance: scene.min_clearance(&position, step),
            avoidance_active: avoidance,
        });
    }

    // step 0: the start pose
    let start = executor.measured();
    push_record(executor, &mut record, scene, goal, step, &start, false);
    step += 1;

    loop {
        let current = executor.measured();
        if goal_error(&current, goal) <= planner.goal_tolerance {
            return Ok(stats.finish(record, RunStatus::Success));
        }
        if step > max_iterations {
            let residual = goal_error(&current, goal);
            return Ok(stats.finish(
                record,
                RunStatus::NonConvergence { iterations: step - 1, residual },
            ));
        }

        let t_step = Instant::now();
        let position = current.translation().as_vector();

        // obstacle branch: shell intrusion triggers an escape-tree detour
        let mut detoured = false;
        if let Some((obstacle, _)) = closest_obstacle(scene, &position, step) {
            if inside_detection_shell(&position, obstacle) {
                stats.avoidance_events += 1;
                if stats.avoidance_events > sim.max_avoidance_events {
                    return Ok(stats.finish(
                        record,
                        RunStatus::AvoidanceFailure {
                            reason: format!(
                                "exceeded {} avoidance episodes",
                                sim.max_avoidance_events
                            ),
                        },
                    ));
                }

                // Reconnection candidates: upcoming replay poses whose
                // translations are already outside this obstacle's shell,
                // in path order; the goal is the built-in fallback.
                let first = guiding_index.max(1) - 1;
                let candidates: Vec<(usize, Vector3<f64>)> = (first..n)
                    .map(|i| (i + 1, ip.poses()[i].translation().as_vector()))
                    .filter(|(_, t)| !inside_detection_shell(t, obstacle))
                    .collect();
                let candidate_translations: Vec<Vector3<f64>> =
                    candidates.iter().map(|(_, t)| *t).collect();

                let escape = match escape_tree(
                    &current,
                    &goal.translation().as_vector(),
                    &candidate_translations,
                    obstacle,
                    scene,
                    step,
                    repet,
                    &mut rng,
                ) {
                    Ok(e) => e,
                    Err(Error::AvoidanceFailure(reason)) => {
                        return Ok(stats
                            .finish(record, RunStatus::AvoidanceFailure { reason }));
                    }
                    Err(e) => return Err(e),
                };
                stats
                    .escape_level_ms
                    .extend(escape.level_times.iter().map(|d| d.as_secs_f64() * 1e3));

                // Resume target: the reconnected replay pose, or the goal.
                let (resume_pose, resume_index) = match escape.reconnect_index {
                    Some(ci) => {
                        let (ip_index, _) = candidates[ci];
                        (ip.poses()[ip_index - 1], ip_index)
                    }
                    None => (*goal, n),
                };

                // Shift the upcoming interpolated segment onto the escape
                // polyline (translations only; orientations stay on the
                // original interpolation). Source poses sit at the
                // polyline-vertex arc fractions: the interpolant is a
                // constant screw, so its translation arc length is
                // proportional to τ and the shifted key poses land exactly
                // on the collision-checked vertices.
                let polyline = escape.polyline();
                let fractions = crate::avoidance::polyline_arc_fractions(&polyline);
                let source: Vec<UnitDualQuaternion> = fractions
                    .iter()
                    .map(|f| UnitDualQuaternion::sclerp(&current, &resume_pose, *f))
                    .collect();
                let segment = shift_final_path(
                    &PosePath::new(PathKind::Final, source).expect("segment length >= 2"),
                    &polyline,
                );

                for key_pose in segment.iter().skip(1) {
                    let ok = executor.converge_to(
                        key_pose,
                        scene,
                        step,
                        sim.track_tolerance,
                        sim.max_track_steps,
                    )?;
                    if !ok {
                        return Ok(stats.finish(
                            record,
                            RunStatus::AvoidanceFailure {
                                reason: "tracking failed to reach an escape key pose".into(),
                            },
                        ));
                    }
                    push_record(executor, &mut record, scene, goal, step, key_pose, true);
                    step += 1;
                }
                guiding_index = resume_index;
                detoured = true;
            }
        }

        if !detoured {
            let (guide, next_index) = select_guiding_pose(&ip, guiding_index, planner);
            guiding_index = next_index;
            let target = target_pose(&current, &guide, planner.tau_step);
            executor.step_toward(&target, scene, step)?;
            push_record(executor, &mut record, scene, goal, step, &target, false);
            step += 1;
        }
        stats.planner_step_ms.push(t_step.elapsed().as_secs_f64() * 1e3);
    }
}

/// Where the run starts: an explicit joint configuration or a task-space
/// pose the controller seeks first.
#[derive(Debug, Clone)]
pub enum StartSpec {
    Config(Vec<f64>),
    Pose(UnitDualQuaternion),
}

/// A full experiment description; mirrors the config file sections.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub robot: String,
    pub demo: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scene: Option<String>,
    /// Goal pose, 8- or 7-scalar form.
    pub goal: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_pose: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_config: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<String>,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub repet: RepetParams,
    #[serde(default)]
    pub sim: SimParams,
}

impl ExperimentConfig {
    pub fn from_toml_str(content: &str) -> Result<Self> {
        let config = Self::from_toml_str_partial(content)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without validating completeness; used when CLI flags fill in
    /// the remaining fields afterward.
    pub fn from_toml_str_partial(content: &str) -> Result<Self> {
        toml::from_str(content).map_err(|e| Error::parse("config file", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.start_pose, &self.start_config) {
            (Some(_), Some(_)) => Err(Error::InvalidInput(
                "give exactly one of start_pose and start_config, not both".into(),
            )),
            (None, None) => Err(Error::InvalidInput(
                "one of start_pose or start_config is required".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn start(&self) -> Result<StartSpec> {
        self.validate()?;
        if let Some(q) = &self.start_config {
            return Ok(StartSpec::Config(q.clone()));
        }
        Ok(StartSpec::Pose(formats::pose_from_scalars(
            self.start_pose.as_ref().unwrap(),
        )?))
    }

    pub fn goal_pose(&self) -> Result<UnitDualQuaternion> {
        formats::pose_from_scalars(&self.goal)
    }

    /// SHA-256 of the resolved configuration serialization: the
    /// reproducibility fingerprint written into every output set.
    pub fn sha256(&self) -> String {
        let serialized = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(serialized.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Seeks a joint configuration whose forward kinematics match `pose` by
/// running the tracking controller from the mid-range configuration and,
/// if that stalls in a local minimum, from seeded random restarts.
pub fn seek_start_config(
    model: &SerialManipulator,
    pose: &UnitDualQuaternion,
    controller: &ControllerParams,
    sim: &SimParams,
    seed: u64,
) -> Result<JointConfig> {
    let scene = ObstacleScene::empty();
    let mut restart_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7365_656b);
    let mut best_residual = f64::INFINITY;
    for attempt in 0..8 {
        let q0 = if attempt == 0 {
            let mid: Vec<f64> = model.joints.iter().map(|j| j.mid_range()).collect();
            JointConfig::from_slice(&mid)
        } else {
            model.sample_config(&mut restart_rng, 0.85)
        };
        let mut executor =
            ControllerExecutor::new(model, q0, controller.clone(), sim.clone(), seed)?;
        let reached =
            executor.converge_to(pose, &scene, 0, sim.track_tolerance, sim.max_track_steps)?;
        if reached {
            return Ok(executor.state().q.clone());
        }
        best_residual = best_residual.min(goal_error(&executor.measured(), pose));
    }
    Err(Error::UnreachableGoal(format!(
        "start pose unreachable by {} (best residual {best_residual})",
        model.name,
    )))
}

/// Runs a configured experiment end to end and writes outputs when an
/// output directory is set. The trajectory is written even for
/// non-convergent or avoidance-failed runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let model = SerialManipulator::resolve(&config.robot)?;
    let demo_poses = formats::read_demo_file(Path::new(&config.demo))?;
    let demo = PosePath::demonstrated(demo_poses)?;
    let scene = match &config.scene {
        Some(path) => ObstacleScene::load(Path::new(path))?,
        None => ObstacleScene::empty(),
    };
    let goal = config.goal_pose()?;

    let q0 = match config.start()? {
        StartSpec::Config(q) => {
            if q.len() != model.dof() {
                return Err(Error::DimensionMismatch { expected: model.dof(), got: q.len() });
            }
            JointConfig::from_slice(&q)
        }
        StartSpec::Pose(pose) => {
            seek_start_config(&model, &pose, &config.controller, &config.sim, config.seed)?
        }
    };

    let mut executor = ControllerExecutor::new(
        &model,
        q0,
        config.controller.clone(),
        config.sim.clone(),
        config.seed,
    )?;
    let mut artifacts = run_reactive(
        &demo,
        &goal,
        &scene,
        &config.planner,
        &config.repet,
        &config.sim,
        &mut executor,
        config.seed,
    )?;
    artifacts.summary.config_sha256 = config.sha256();

    if let Some(out) = &config.out {
        write_outputs(Path::new(out), config, &artifacts, model.dof())?;
    }
    Ok(artifacts)
}

/// Writes trajectory.csv, summary.txt, meta.toml, the resolved config and
/// the plot series.
pub fn write_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    artifacts: &RunArtifacts,
    dof: usize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("trajectory.csv"), artifacts.record.to_csv(dof))?;
    std::fs::write(out_dir.join("summary.txt"), artifacts.summary.to_text())?;
    let meta = format!(
        "config_sha256 = \"{}\"\nseed = {}\nstatus = \"{}\"\nexit_code = {}\n",
        config.sha256(),
        config.seed,
        artifacts.summary.status.label(),
        artifacts.summary.status.exit_code(),
    );
    std::fs::write(out_dir.join("meta.toml"), meta)?;
    std::fs::write(
        out_dir.join("config.resolved.toml"),
        toml::to_string(config).expect("config serializes"),
    )?;
    emit_plots(&artifacts.record, out_dir)?;
    Ok(())
}

/// Emits plot-ready CSV series (3D path, error vs step, clearance vs step)
/// plus a matplotlib script that renders them.
pub fn emit_plots(record: &TrajectoryRecord, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    let mut path_csv = String::from("step,x,y,z\n");
    let mut error_csv = String::from("step,goal_error\n");
    let mut clearance_csv = String::from("step,min_clearance\n");
    for s in &record.steps {
        let t = s.x_m.translation();
        path_csv.push_str(&format!(
            "{},{},{},{}\n",
            s.step,
            formats::format_f64(t.x),
            formats::format_f64(t.y),
            formats::format_f64(t.z)
        ));
        error_csv.push_str(&format!("{},{}\n", s.step, formats::format_f64(s.goal_error)));
        if let Some(c) = s.min_clearance {
            clearance_csv.push_str(&format!("{},{}\n", s.step, formats::format_f64(c)));
        }
    }
    std::fs::write(out_dir.join("path.csv"), path_csv)?;
    std::fs::write(out_dir.join("error.csv"), error_csv)?;
    std::fs::write(out_dir.join("clearance.csv"), clearance_csv)?;
    std::fs::write(out_dir.join("plot.py"), PLOT_SCRIPT)?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Renders the CSV series emitted next to this script."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as f:
        return list(csv.DictReader(f))


path = read("path.csv")
error = read("error.csv")
clearance = read("clearance.csv")

fig = plt.figure(figsize=(12, 4))
ax = fig.add_subplot(1, 3, 1, projection="3d")
ax.plot(
    [float(r["x"]) for r in path],
    [float(r["y"]) for r in path],
    [float(r["z"]) for r in path],
)
ax.set_title("end-effector path")

ax = fig.add_subplot(1, 3, 2)
ax.semilogy(
    [int(r["step"]) for r in error],
    [max(float(r["goal_error"]), 1e-16) for r in error],
)
ax.set_title("goal error")
ax.set_xlabel("step")

ax = fig.add_subplot(1, 3, 3)
if clearance:
    ax.plot(
        [int(r["step"]) for r in clearance],
        [float(r["min_clearance"]) for r in clearance],
    )
    ax.axhline(0.0, color="r", linestyle="--")
ax.set_title("obstacle clearance")
ax.set_xlabel("step")

out = os.path.join(here, "run.png")
fig.tight_layout()
fig.savefig(out, dpi=130)
print(out)
"#;

/// Forward-kinematics capture of a joint trajectory into a demonstration:
/// one pose per configuration, consecutive duplicates collapsed.
pub fn record_demo(
    model: &SerialManipulator,
    joint_trajectory: &[JointConfig],
) -> Result<Vec<UnitDualQuaternion>> {
    let mut poses = Vec::with_capacity(joint_trajectory.len());
    for q in joint_trajectory {
        poses.push(model.forward_kinematics(q)?);
    }
    Ok(formats::collapse_duplicates(&poses))
}

/// Reads a joint trajectory file: one configuration per line, whitespace
/// or comma separated, `#` comments ignored.
pub fn read_joint_trajectory(path: &Path, dof: usize) -> Result<Vec<JointConfig>> {
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = formats::parse_scalars(line)?;
        if vals.len() != dof {
            return Err(Error::parse(
                format!("joint trajectory line {}", idx + 1),
                format!("expected {dof} values, got {}", vals.len()),
            ));
        }
        out.push(JointConfig::from_slice(&vals));
    }
    Ok(out)
}

/// Result of a cross-robot transfer run.
#[derive(Debug)]
pub struct RetargetOutcome {
    /// Open-loop final path (no robot in the loop).
    pub fp_ideal: PosePath,
    /// Final path tracked by the target robot.
    pub fp_executed: PosePath,
    pub artifacts: RunArtifacts,
}

/// Plans the same demonstration toward `goal` both open loop and on the
/// given robot; the task-space paths agree within the tracking tolerance
/// while the joint trajectories are the robot's own.
pub fn retarget_demo(
    demo: &PosePath,
    model: &SerialManipulator,
    goal: &UnitDualQuaternion,
    planner: &PlannerParams,
    controller: &ControllerParams,
    sim: &SimParams,
    seed: u64,
) -> Result<RetargetOutcome> {
    // reachability gate for the goal
    seek_start_config(model, goal, controller, sim, seed)
        .map_err(|_| Error::UnreachableGoal(format!("goal pose unreachable by {}", model.name)))?;

    let deltas = relative_transforms(demo)?;
    let ip = imitated_path(&deltas, goal)?;
    let start_pose = *ip.first();
    let scene = ObstacleScene::empty();

    let mut ideal = IdealExecutor::new(start_pose);
    let ideal_arts = run_reactive(
        demo,
        goal,
        &scene,
        planner,
        &RepetParams::default(),
        sim,
        &mut ideal,
        seed,
    )?;
    let fp_ideal = ideal_arts.record.final_path()?;

    let q0 = seek_start_config(model, &start_pose, controller, sim, seed)?;
    let mut executor = ControllerExecutor::new(model, q0, controller.clone(), sim.clone(), seed)?;
    let artifacts = run_reactive(
        demo,
        goal,
        &scene,
        planner,
        &RepetParams::default(),
        sim,
        &mut executor,
        seed,
    )?;
    let fp_executed = artifacts.record.final_path()?;

    Ok(RetargetOutcome { fp_ideal, fp_executed, artifacts })
}
