//! Task-space imitation planning: extracts the relative transforms of a
//! demonstrated pose path, replays them backward from a new goal (the
//! imitated path), and blends a new start into that path with guided
//! ScLERP pursuit until the goal is reached.

use thiserror::Error as ThisError;

use crate::dq::UnitDualQuaternion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Demonstrated,
    Imitated,
    Final,
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathKind::Demonstrated => write!(f, "demonstrated"),
            PathKind::Imitated => write!(f, "imitated"),
            PathKind::Final => write!(f, "final"),
        }
    }
}

/// An ordered sequence of at least two valid poses.
#[derive(Debug, Clone)]
pub struct PosePath {
    poses: Vec<UnitDualQuaternion>,
    kind: PathKind,
}

impl PosePath {
    pub fn new(kind: PathKind, poses: Vec<UnitDualQuaternion>) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::PathTooShort { need: 2, got: poses.len() });
        }
        Ok(PosePath { poses, kind })
    }

    pub fn demonstrated(poses: Vec<UnitDualQuaternion>) -> Result<Self> {
        Self::new(PathKind::Demonstrated, poses)
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[UnitDualQuaternion] {
        &self.poses
    }

    pub fn first(&self) -> &UnitDualQuaternion {
        self.poses.first().expect("pose paths hold at least two poses")
    }

    pub fn last(&self) -> &UnitDualQuaternion {
        self.poses.last().expect("pose paths hold at least two poses")
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UnitDualQuaternion> {
        self.poses.iter()
    }
}

/// Parameters of the guided pursuit.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// ScLERP fraction advanced toward the guiding pose per iteration.
    pub tau_step: f64,
    /// Vec-norm error below which the goal counts as reached.
    pub goal_tolerance: f64,
    /// Fraction of the imitated path at which the first guiding pose sits.
    /// The useful band is roughly 0.2 to 0.7.
    pub guiding_fraction: f64,
    /// Iteration cap; `None` derives `ceil(10·n/τ_step)` from the path.
    pub max_iterations: Option<usize>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            tau_step: 0.01,
            goal_tolerance: 1e-3,
            guiding_fraction: 0.2,
            max_iterations: None,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_step > 0.0 && self.tau_step <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "tau_step must lie in (0, 1], got {}",
                self.tau_step
            )));
        }
        if !(0.0..=1.0).contains(&self.guiding_fraction) {
            return Err(Error::InvalidInput(format!(
                "guiding_fraction must lie in [0, 1], got {}",
                self.guiding_fraction
            )));
        }
        if self.goal_tolerance <= 0.0 {
            return Err(Error::InvalidInput("goal_tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_max_iterations(&self, path_len: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| (10.0 * path_len as f64 / self.tau_step).ceil() as usize)
    }
}

/// Relative transform of every demonstrated pose to the demonstrated goal:
/// `δ_i = d*_{i-1} · d_n`, one entry per pose except the last.
pub fn relative_transforms(dp: &PosePath) -> Result<Vec<UnitDualQuaternion>> {
    if dp.kind() != PathKind::Demonstrated {
        return Err(Error::PathKindMismatch {
            expected: PathKind::Demonstrated.to_string(),
            got: dp.kind().to_string(),
        });
    }
    let goal = *dp.last();
    Ok(dp.poses[..dp.len() - 1]
        .iter()
        .map(|d| d.conjugate() * goal)
        .collect())
}

/// Replays the demonstrated relative transforms backward from a new goal:
/// `d'_{i-1} = d'_n · δ_i*` with `d'_n` the new goal. The relative
/// transform between any two poses equals that of the demonstration.
pub fn imitated_path(
    deltas: &[UnitDualQuaternion],
    new_goal: &UnitDualQuaternion,
) -> Result<PosePath> {
    if deltas.is_empty() {
        return Err(Error::PathTooShort { need: 2, got: 1 });
    }
    let mut poses: Vec<UnitDualQuaternion> =
        deltas.iter().map(|delta| *new_goal * delta.conjugate()).collect();
    poses.push(*new_goal);
    PosePath::new(PathKind::Imitated, poses)
}

/// Interpolated target `d_c · (d_c* · d_guid)^τ`: τ = 0 stays at the
/// current pose, τ = 1 reaches the guiding pose.
pub fn target_pose(
    d_c: &UnitDualQuaternion,
    d_guid: &UnitDualQuaternion,
    tau: f64,
) -> UnitDualQuaternion {
    UnitDualQuaternion::sclerp(d_c, d_guid, tau)
}

/// Advances the guiding-pose schedule. Indices are 1-based over the
/// imitated path; `current_index = 0` means "not started", for which the
/// schedule returns the pose at `ceil(guiding_fraction · n)` (the goal
/// itself when the fraction is 1). Subsequent calls advance by one until
/// the goal index `n` is reached. The returned index is monotone.
pub fn select_guiding_pose(
    ip: &PosePath,
    current_index: usize,
    params: &PlannerParams,
) -> (UnitDualQuaternion, usize) {
    let n = ip.len();
    let next = if current_index == 0 {
        if params.guiding_fraction >= 1.0 {
            n
        } else {
            ((params.guiding_fraction * n as f64).ceil() as usize).clamp(1, n - 1)
        }
    } else {
        (current_index + 1).min(n)
    };
    (ip.poses[next - 1], next)
}

/// Vec-space distance to the goal with the double cover resolved by sign
/// normalization against the current pose; zero iff the poses agree.
pub fn goal_error(d_c: &UnitDualQuaternion, d_goal: &UnitDualQuaternion) -> f64 {
    let vc = d_c.vec8();
    let mut vg = d_goal.vec8();
    if vc.dot(&vg) < 0.0 {
        vg = -vg;
    }
    (vc - vg).norm()
}

/// Planner failure: non-convergence keeps the partial path.
#[derive(Debug, ThisError)]
pub enum PlanFailure {
    #[error("planner did not converge within {iterations} iterations (residual {residual})")]
    NonConvergence {
        partial: PosePath,
        iterations: usize,
        residual: f64,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl From<PlanFailure> for Error {
    fn from(f: PlanFailure) -> Error {
        match f {
            PlanFailure::NonConvergence { iterations, residual, .. } => {
                Error::NonConvergence { iterations, residual }
            }
            PlanFailure::Invalid(e) => e,
        }
    }
}

/// Runs the guided pursuit from `start` toward the goal-retargeted replay
/// of `dp`. Each iteration interpolates one ScLERP step toward the current
/// guiding pose and hands the target to `step_executor`, which returns the
/// pose actually reached (the identity mapping in open-loop planning).
/// Obstacle handling is the caller's concern, injected through the
/// executor or handled by the simulation harness.
pub fn plan<F>(
    dp: &PosePath,
    start: &UnitDualQuaternion,
    goal: &UnitDualQuaternion,
    params: &PlannerParams,
    mut step_executor: F,
) -> std::result::Result<PosePath, PlanFailure>
where
    F: FnMut(&UnitDualQuaternion) -> UnitDualQuaternion,
{
    params.validate()?;
    let deltas = relative_transforms(dp)?;
    let ip = imitated_path(&deltas, goal)?;
    let max_iterations = params.resolved_max_iterations(ip.len());

    let mut fp = vec![*start];
    let mut current = *start;
    let mut guiding_index = 0usize;

    for _ in 0..max_iterations {
        if goal_error(&current, goal) <= params.goal_tolerance {
            if fp.len() < 2 {
                fp.push(current);
            }
            return Ok(PosePath::new(PathKind::Final, fp).expect("final path has two poses"));
        }
        let (guide, next_index) = select_guiding_pose(&ip, guiding_index, params);
        guiding_index = next_index;
        let target = target_pose(&current, &guide, params.tau_step);
        current = step_executor(&target);
        fp.push(current);
    }

    let residual = goal_error(&current, goal);
    if residual <= params.goal_tolerance {
        return Ok(PosePath::new(PathKind::Final, fp).expect("final path has two poses"));
    }
    Err(PlanFailure::NonConvergence {
        partial: PosePath::new(PathKind::Final, fp).expect("partial path has two poses"),
        iterations: max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dq::{pose_distance, PureQuaternion, UnitQuaternion};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn translation(x: f64, y: f64, z: f64) -> UnitDualQuaternion {
        UnitDualQuaternion::from_translation(PureQuaternion::new(x, y, z))
    }

    fn random_demo(rng: &mut ChaCha8Rng, n: usize) -> PosePath {
        let poses = (0..n).map(|_| UnitDualQuaternion::sample(rng, 1.5)).collect();
        PosePath::demonstrated(poses).unwrap()
    }

    /// Demonstration along a single screw: d_k = d_0 · S^(k/(n-1)).
    fn screw_demo(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (PosePath, UnitDualQuaternion, UnitDualQuaternion) {
        let d0 = UnitDualQuaternion::sample(rng, 1.0);
        let screw = UnitDualQuaternion::sample(rng, 0.5).sign_normalized();
        let poses = (0..n)
            .map(|k| d0 * screw.pow(k as f64 / (n - 1) as f64))
            .collect();
        (PosePath::demonstrated(poses).unwrap(), d0, screw)
    }

    #[test]
    fn relative_transforms_of_constant_path_are_identity() {
        let pose = translation(0.3, -0.2, 0.1);
        let dp = PosePath::demonstrated(vec![pose; 5]).unwrap();
        for delta in relative_transforms(&dp).unwrap() {
            assert!(pose_distance(&delta, &UnitDualQuaternion::IDENTITY) < 1e-12);
        }
    }

    #[test]
    fn relative_transform_two_pose_translation() {
        let dp = PosePath::demonstrated(vec![
            UnitDualQuaternion::IDENTITY,
            translation(1.0, 0.0, 0.0),
        ])
        .unwrap();
        let deltas = relative_transforms(&dp).unwrap();
        assert_eq!(deltas.len(), 1);
        assert!(pose_distance(&deltas[0], &translation(1.0, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn last_delta_reproduces_final_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let dp = random_demo(&mut rng, 8);
            let deltas = relative_transforms(&dp).unwrap();
            let n = dp.len();
            let expected = dp.poses()[n - 2].conjugate() * *dp.last();
            assert!(pose_distance(deltas.last().unwrap(), &expected) < 1e-12);
        }
    }

    #[test]
    fn relative_transforms_validates_input() {
        let too_short = PosePath::demonstrated(vec![UnitDualQuaternion::IDENTITY]);
        assert!(too_short.is_err());
        let wrong_kind = PosePath::new(
            PathKind::Final,
            vec![UnitDualQuaternion::IDENTITY, translation(1.0, 0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            relative_transforms(&wrong_kind),
            Err(Error::PathKindMismatch { .. })
        ));
    }

    #[test]
    fn retarget_to_original_goal_reproduces_demo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let dp = random_demo(&mut rng, 12);
            let deltas = relative_transforms(&dp).unwrap();
            let ip = imitated_path(&deltas, dp.last()).unwrap();
            assert_eq!(ip.len(), dp.len());
            for (a, b) in ip.iter().zip(dp.iter()) {
                assert!(pose_distance(a, b) < 1e-9);
            }
        }
    }

    #[test]
    fn retarget_is_left_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let dp = random_demo(&mut rng, 10);
            let g = UnitDualQuaternion::sample(&mut rng, 1.0);
            let deltas = relative_transforms(&dp).unwrap();
            let ip = imitated_path(&deltas, &(g * *dp.last())).unwrap();
            for (a, b) in ip.iter().zip(dp.iter()) {
                assert!(pose_distance(a, &(g * *b)) < 1e-9);
            }
        }
    }

    #[test]
    fn retarget_preserves_relative_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dp = random_demo(&mut rng, 10);
        let goal = UnitDualQuaternion::sample(&mut rng, 1.5);
        let deltas = relative_transforms(&dp).unwrap();
        let ip = imitated_path(&deltas, &goal).unwrap();
        for i in 1..dp.len() {
            let rel_dp = dp.poses()[i - 1].conjugate() * dp.poses()[i];
            let rel_ip = ip.poses()[i - 1].conjugate() * ip.poses()[i];
            assert!(pose_distance(&rel_dp, &rel_ip) < 1e-9);
        }
    }

    #[test]
    fn fixed_axis_demo_keeps_axis_in_replay() {
        // Demonstration rotating about one fixed spatial line; the replay's
        // relative transforms must stay screws about the transported line.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let axis = Vector3::new(0.0, 0.0, 1.0);
        let point = Vector3::new(0.5, 0.0, 0.0);
        let base = UnitDualQuaternion::sample(&mut rng, 0.5);
        let poses: Vec<_> = (0..8)
            .map(|k| {
                let theta = 0.15 * k as f64;
                let r = UnitQuaternion::from_axis_angle(axis, theta);
                let p = point - r.rotate_vector(point);
                UnitDualQuaternion::from_rotation_translation(r, PureQuaternion::from(p)) * base
            })
            .collect();
        let dp = PosePath::demonstrated(poses).unwrap();
        let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
        let ip = imitated_path(&relative_transforms(&dp).unwrap(), &goal).unwrap();
        // body-frame screws of consecutive relatives all share one axis
        let reference = (ip.poses()[0].conjugate() * ip.poses()[1]).screw_parameters();
        for i in 2..ip.len() {
            let s = (ip.poses()[i - 1].conjugate() * ip.poses()[i]).screw_parameters();
            assert!(reference.axis.cross(&s.axis).norm() < 1e-9);
            assert!(s.translation.abs() < 1e-9, "zero-pitch screw expected");
        }
    }

    #[test]
    fn target_pose_boundaries_and_small_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = UnitDualQuaternion::sample(&mut rng, 1.0);
        let other = UnitDualQuaternion::sample(&mut rng, 1.0);
        assert!(pose_distance(&target_pose(&x, &other, 0.0), &x) < 1e-12);

        let t = target_pose(
            &UnitDualQuaternion::IDENTITY,
            &translation(1.0, 0.0, 0.0),
            0.01,
        );
        assert!(
            (t.translation().as_vector() - Vector3::new(0.01, 0.0, 0.0)).norm() < 1e-12
        );

        // definitional equality with sclerp
        for _ in 0..20 {
            let a = UnitDualQuaternion::sample(&mut rng, 1.0);
            let b = UnitDualQuaternion::sample(&mut rng, 1.0);
            let tau = rng.gen_range(0.0..1.0);
            assert_eq!(
                target_pose(&a, &b, tau).vec8(),
                UnitDualQuaternion::sclerp(&a, &b, tau).vec8()
            );
        }
    }

    #[test]
    fn guiding_schedule_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let ip = PosePath::new(
            PathKind::Imitated,
            (0..10).map(|_| UnitDualQuaternion::sample(&mut rng, 1.0)).collect(),
        )
        .unwrap();
        let params = PlannerParams { guiding_fraction: 0.2, ..Default::default() };
        let (pose, idx) = select_guiding_pose(&ip, 0, &params);
        assert_eq!(idx, 2);
        assert!(pose_distance(&pose, &ip.poses()[1]) < 1e-15);

        // advancing from n-1 reaches the goal and stays there
        let (pose, idx) = select_guiding_pose(&ip, 9, &params);
        assert_eq!(idx, 10);
        assert!(pose_distance(&pose, ip.last()) < 1e-15);
        let (_, idx) = select_guiding_pose(&ip, 10, &params);
        assert_eq!(idx, 10);

        // degenerate but legal: fraction 1.0 starts at the goal itself
        let goal_first = PlannerParams { guiding_fraction: 1.0, ..Default::default() };
        let (pose, idx) = select_guiding_pose(&ip, 0, &goal_first);
        assert_eq!(idx, 10);
        assert!(pose_distance(&pose, ip.last()) < 1e-15);
    }

    #[test]
    fn goal_error_examples() {
        let x = translation(0.4, 0.0, -0.2);
        assert_eq!(goal_error(&x, &x), 0.0);

        let neg = UnitDualQuaternion::try_new(
            -UnitDualQuaternion::IDENTITY.as_dual_quaternion(),
            1e-9,
        )
        .unwrap();
        assert!(goal_error(&UnitDualQuaternion::IDENTITY, &neg) < 1e-15);

        let e = goal_error(&UnitDualQuaternion::IDENTITY, &translation(1.0, 0.0, 0.0));
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plan_from_on_path_start_stays_on_screw_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (dp, _, _) = screw_demo(&mut rng, 20);
        let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
        let deltas = relative_transforms(&dp).unwrap();
        let ip = imitated_path(&deltas, &goal).unwrap();
        let start = *ip.first();

        let fp = plan(&dp, &start, &goal, &PlannerParams::default(), |t| *t).unwrap();

        // Every final-path pose must lie on the one-parameter screw family
        // through the imitated path: log(ip_1* x) parallel to the full
        // displacement log.
        let xi = (ip.first().conjugate() * *ip.last()).log().vec8();
        let xi_norm2 = xi.dot(&xi);
        for pose in fp.iter() {
            let y = (ip.first().conjugate() * *pose).log().vec8();
            let residual = y - xi * (y.dot(&xi) / xi_norm2);
            assert!(
                residual.norm() < 1e-6,
                "final path left the imitated screw path by {}",
                residual.norm()
            );
        }
        assert!(goal_error(fp.last(), &goal) <= 1e-3);
    }

    #[test]
    fn plan_self_retarget_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (dp, _, _) = screw_demo(&mut rng, 15);
        let fp = plan(
            &dp,
            dp.first(),
            dp.last(),
            &PlannerParams::default(),
            |t| *t,
        )
        .unwrap();
        assert!(goal_error(fp.last(), dp.last()) <= 1e-3);
    }

    #[test]
    fn plan_is_left_invariant() {
        // The pursuit dynamics are exactly equivariant under constant left
        // multiplication; a fixed iteration budget keeps both runs the same
        // length (the vec-norm stop test itself is not left-invariant).
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let dp = random_demo(&mut rng, 10);
        let start = UnitDualQuaternion::sample(&mut rng, 1.0);
        let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
        let g = UnitDualQuaternion::sample(&mut rng, 1.0);
        let params = PlannerParams {
            max_iterations: Some(400),
            goal_tolerance: 1e-12,
            ..Default::default()
        };

        let fp = plan(&dp, &start, &goal, &params, |t| *t);
        let shifted_dp = PosePath::demonstrated(dp.iter().map(|d| g * *d).collect()).unwrap();
        let fp_shifted = plan(&shifted_dp, &(g * start), &(g * goal), &params, |t| *t);

        let (fp, fp_shifted) = match (fp, fp_shifted) {
            (
                Err(PlanFailure::NonConvergence { partial: a, .. }),
                Err(PlanFailure::NonConvergence { partial: b, .. }),
            ) => (a, b),
            other => panic!("expected both runs to exhaust the budget: {other:?}"),
        };
        assert_eq!(fp.len(), fp_shifted.len());
        for (a, b) in fp.iter().zip(fp_shifted.iter()) {
            assert!(pose_distance(&(g * *a), b) < 1e-8);
        }
    }

    #[test]
    fn goal_error_monotone_once_guiding_is_goal() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (dp, _, _) = screw_demo(&mut rng, 10);
        let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
        let start = UnitDualQuaternion::sample(&mut rng, 1.0);
        let params = PlannerParams::default();

        let mut errors = Vec::new();
        let _ = plan(&dp, &start, &goal, &params, |t| {
            errors.push(goal_error(t, &goal));
            *t
        });
        // once the schedule reaches the goal (at most n iterations in), the
        // error must be non-increasing
        let n = dp.len();
        for w in errors[n..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "error increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn plan_halts_within_iteration_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let (dp, _, _) = screw_demo(&mut rng, 12);
            let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
            let start = UnitDualQuaternion::sample(&mut rng, 1.0);
            let params = PlannerParams::default();
            let mut steps = 0usize;
            let fp = plan(&dp, &start, &goal, &params, |t| {
                steps += 1;
                *t
            })
            .unwrap();
            let n = dp.len();
            let decay = ((params.goal_tolerance.ln()) / (1.0 - params.tau_step).ln()).ceil() as usize;
            let bound = n + decay + 150;
            assert!(
                steps <= bound,
                "took {steps} iterations, bound {bound} (fp len {})",
                fp.len()
            );
        }
    }

    #[test]
    fn plan_reports_non_convergence_with_partial_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let dp = random_demo(&mut rng, 8);
        let goal = UnitDualQuaternion::sample(&mut rng, 1.0);
        let start = UnitDualQuaternion::sample(&mut rng, 1.0);
        let params = PlannerParams { max_iterations: Some(5), ..Default::default() };
        match plan(&dp, &start, &goal, &params, |t| *t) {
            Err(PlanFailure::NonConvergence { partial, iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert_eq!(partial.len(), 6); // start + 5 steps
                assert!(residual > params.goal_tolerance);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
