//! Closed-loop execution: pure pursuit tracking, tilt regulation and
//! receding-horizon replanning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_trajectory, TokenizedStep};
use crate::dataset::{expert_plan, expert_steps, tilt_for, DataError, ExpertConfig, Task};
use crate::geometry::{pose_error, tilt_setpoint, wrap_angle, CameraModel, Pose2, TiltLimits};
use crate::kinematics::{step_kinematics, Command, KinematicLimits, Kinematics, RobotState};
use crate::scene::{clearance, collision_check, raycast_lidar, LidarConfig, LidarScan, Scene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("invalid executor config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    pub horizon_n: usize,
    pub dt: f64,
    pub replan_every: usize,
    pub lookahead: f64,
    pub speed: f64,
    pub stop_pos_tol: f64,
    pub stop_ang_tol: f64,
    pub max_steps: usize,
    /// Largest tilt change per step.
    pub max_tilt_slew: f64,
    /// Heading error above which the robot turns in place before driving.
    pub align_tol: f64,
    pub limits: KinematicLimits,
    pub tilt_limits: TiltLimits,
    pub camera: CameraModel,
    pub lidar: LidarConfig,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            horizon_n: 12,
            dt: 0.2,
            replan_every: 8,
            lookahead: 0.3,
            speed: 0.5,
            stop_pos_tol: 0.01,
            stop_ang_tol: 0.5f64.to_radians(),
            max_steps: 600,
            max_tilt_slew: 10f64.to_radians(),
            align_tol: 1f64.to_radians(),
            limits: KinematicLimits::default(),
            tilt_limits: TiltLimits::default(),
            camera: CameraModel::default(),
            lidar: LidarConfig::default(),
        }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.horizon_n > 0
            && self.replan_every > 0
            && self.replan_every <= self.horizon_n
            && self.dt > 0.0
            && self.lookahead > 0.0
            && self.speed > 0.0
            && self.speed <= self.limits.max_speed
            && self.stop_pos_tol > 0.0
            && self.stop_ang_tol > 0.0
            && self.max_tilt_slew > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Distance below which a trajectory point counts as passed.
const PASS_TOL: f64 = 0.005;
/// Direction change that ends a straight prefix.
const CORNER_TOL: f64 = std::f64::consts::PI / 180.0;

/// Index of the last point of the leading straight run of `traj`.
///
/// When the robot at `from` still has to drive to `traj[0]`, a turn in place there ends the run.
fn prefix_end(from: &Pose2, traj: &[Pose2]) -> usize {
    if traj.len() > 1 && traj[0].distance_to(from) > PASS_TOL && traj[1].distance_to(&traj[0]) < 1e-9 {
        return 0;
    }
    let mut dir: Option<[f64; 2]> = None;
    for i in 1..traj.len() {
        let dx = traj[i].x - traj[i - 1].x;
        let dy = traj[i].y - traj[i - 1].y;
        let n = dx.hypot(dy);
        if n < 1e-9 {
            if dir.is_some() {
                return i - 1;
            }
            continue;
        }
        let d = [dx / n, dy / n];
        if let Some(p) = dir {
            let cross = p[0] * d[1] - p[1] * d[0];
            let dot = p[0] * d[0] + p[1] * d[1];
            if cross.atan2(dot).abs() > CORNER_TOL {
                return i - 1;
            }
        }
        dir = Some(d);
    }
    traj.len() - 1
}

/// True when the motion towards `traj[end]` is driven in reverse.
fn is_backward(pose: &Pose2, traj: &[Pose2], end: usize) -> bool {
    for i in 1..=end {
        let dx = traj[i].x - traj[i - 1].x;
        let dy = traj[i].y - traj[i - 1].y;
        if dx.hypot(dy) > 1e-9 {
            let h = traj[i].heading;
            return dx * h.cos() + dy * h.sin() < 0.0;
        }
    }
    let dx = traj[0].x - pose.x;
    let dy = traj[0].y - pose.y;
    let h = traj[0].heading;
    dx * h.cos() + dy * h.sin() < 0.0
}

/// True when `traj` ends holding still.
pub fn ends_in_hold(traj: &[Pose2], cfg: &ExecutorConfig) -> bool {
    match traj {
        [.., a, b] => {
            a.distance_to(b) <= cfg.stop_pos_tol && wrap_angle(a.heading - b.heading).abs() <= cfg.stop_ang_tol
        }
        _ => false,
    }
}

fn rotate_cmd(kind: &Kinematics, err: f64, cfg: &ExecutorConfig) -> Command {
    let omega = (err / cfg.dt).clamp(-cfg.limits.max_omega, cfg.limits.max_omega);
    match kind {
        Kinematics::Differential => Command::Differential { v: 0.0, omega },
        Kinematics::Omnidirectional => Command::Omnidirectional { vx: 0.0, vy: 0.0, omega },
        Kinematics::Ackermann { .. } => Command::zero(kind),
    }
}

/// Tracking command towards `traj` (world frame, already trimmed of passed points).
pub fn pure_pursuit(state: &RobotState, traj: &[Pose2], cfg: &ExecutorConfig) -> Result<Command, ControlError> {
    if traj.is_empty() {
        return Err(ControlError::EmptyTrajectory);
    }
    let pose = state.pose;
    let last = traj.len() - 1;
    let end = prefix_end(&pose, traj);
    let target_idx = (0..=end)
        .find(|&i| traj[i].distance_to(&pose) >= cfg.lookahead)
        .unwrap_or(end);
    let tgt = traj[target_idx];
    let d = tgt.distance_to(&pose);
    let kind = state.kinematics;
    if d < 1e-9 && target_idx < last {
        return pure_pursuit(state, &traj[target_idx + 1..], cfg);
    }

    if target_idx == last && d <= cfg.stop_pos_tol {
        let err = wrap_angle(tgt.heading - pose.heading);
        if err.abs() <= cfg.stop_ang_tol || matches!(kind, Kinematics::Ackermann { .. }) {
            return Ok(Command::zero(&kind));
        }
        return Ok(rotate_cmd(&kind, err, cfg));
    }

    // Slow down where the prefix ends: taper into a final hold, never overshoot a corner.
    let mut v = cfg.speed;
    if target_idx == end {
        if target_idx == last && ends_in_hold(traj, cfg) {
            v *= (d / (2.0 * cfg.lookahead)).min(1.0);
        }
        v = v.min(d / cfg.dt);
    }
    v = v.min(cfg.limits.max_speed);

    let local = pose.inverse_transform_point(tgt.position());
    match kind {
        Kinematics::Omnidirectional => {
            let err = wrap_angle(traj[end].heading - pose.heading);
            let omega = (err / cfg.dt).clamp(-cfg.limits.max_omega, cfg.limits.max_omega);
            Ok(Command::Omnidirectional {
                vx: v * local[0] / d,
                vy: v * local[1] / d,
                omega,
            })
        }
        Kinematics::Differential => {
            let backward = is_backward(&pose, traj, end);
            let bearing = local[1].atan2(local[0]);
            let err = if backward { wrap_angle(bearing + std::f64::consts::PI) } else { bearing };
            if err.abs() > cfg.align_tol {
                return Ok(rotate_cmd(&kind, err, cfg));
            }
            let v = if backward { -v } else { v };
            let mut omega = 2.0 * v * local[1] / (d * d);
            let mut v = v;
            if omega.abs() > cfg.limits.max_omega {
                let s = cfg.limits.max_omega / omega.abs();
                omega *= s;
                v *= s;
            }
            Ok(Command::Differential { v, omega })
        }
        Kinematics::Ackermann { wheelbase } => {
            let backward = local[0] < 0.0;
            let v = if backward { -v } else { v };
            let steering = (2.0 * wheelbase * local[1] / (d * d))
                .atan()
                .clamp(-cfg.limits.max_steering, cfg.limits.max_steering);
            Ok(Command::Ackermann { v, steering })
        }
    }
}

/// Next tilt: moves towards the tilt rule for `point` by at most the slew limit.
pub fn tilt_step(state: &RobotState, camera: &CameraModel, point: [f64; 3], cfg: &ExecutorConfig) -> f64 {
    let rho = (point[0] - state.pose.x).hypot(point[1] - state.pose.y);
    let setpoint = if rho > 0.0 {
        cfg.tilt_limits.clamp(tilt_setpoint(camera, &state.pose, point))
    } else {
        cfg.tilt_limits.max
    };
    let delta = (setpoint - state.tilt).clamp(-cfg.max_tilt_slew, cfg.max_tilt_slew);
    cfg.tilt_limits.clamp(state.tilt + delta)
}

pub struct PolicyInput<'a> {
    /// Ground truth for privileged (oracle) policies.
    pub scene: &'a Scene,
    pub state: &'a RobotState,
    pub scan: &'a LidarScan,
    pub task: &'a Task,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub steps: Vec<TokenizedStep>,
    pub tilts: Vec<f64>,
}

/// Anything that maps observations to a tokenized trajectory.
pub trait Policy: Sync {
    fn query(&self, input: &PolicyInput<'_>) -> Result<PolicyOutput, DataError>;
}

/// Expert that replans from the current state on every query.
#[derive(Debug, Clone, Copy)]
pub struct OraclePolicy {
    pub expert: ExpertConfig,
}

impl Policy for OraclePolicy {
    fn query(&self, input: &PolicyInput<'_>) -> Result<PolicyOutput, DataError> {
        // One seed per task keeps successive plans on the same roadmap samples.
        let pose = input.state.pose;
        let path = expert_plan(input.scene, input.task, &pose, &self.expert, input.task.seed)?;
        let steps = expert_steps(&path, &pose, &self.expert)?;
        let world = decode_trajectory(&pose, &steps, true);
        let tilts = world
            .iter()
            .map(|p| tilt_for(input.scene, input.task, p, &self.expert))
            .collect::<Result<_, _>>()?;
        Ok(PolicyOutput { steps, tilts })
    }
}

/// Oracle tokens passed through the codec, optionally without residuals.
#[derive(Debug, Clone, Copy)]
pub struct CodecRoundtripPolicy {
    pub oracle: OraclePolicy,
    pub residuals: bool,
}

impl Policy for CodecRoundtripPolicy {
    fn query(&self, input: &PolicyInput<'_>) -> Result<PolicyOutput, DataError> {
        let mut out = self.oracle.query(input)?;
        if !self.residuals {
            out.steps = out.steps.iter().map(TokenizedStep::coarse).collect();
        }
        Ok(out)
    }
}

/// Policy that never moves.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub horizon: usize,
}

impl Policy for ZeroPolicy {
    fn query(&self, input: &PolicyInput<'_>) -> Result<PolicyOutput, DataError> {
        let steps = crate::codec::encode_trajectory(&vec![Pose2::identity(); self.horizon])?;
        Ok(PolicyOutput {
            steps,
            tilts: vec![input.state.tilt; self.horizon],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Collision,
    Timeout,
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub pose: Pose2,
    pub tilt: f64,
    pub traj_id: usize,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_seed: u64,
    pub outcome: Outcome,
    pub final_pose: Pose2,
    pub distance_error: f64,
    pub angle_error: f64,
    pub steps: usize,
    pub policy_queries: usize,
    pub min_clearance: f64,
    pub trace: Vec<TraceEntry>,
}

/// Sub-steps along one control step used for collision checking.
fn swept_states(
    state: &RobotState,
    cmd: &Command,
    cfg: &ExecutorConfig,
) -> Result<Vec<RobotState>, crate::kinematics::KinematicsError> {
    let n = ((cmd.linear_speed() * cfg.dt / 0.01).ceil() as usize).max(1);
    (1..=n)
        .map(|i| step_kinematics(state, cmd, cfg.dt * i as f64 / n as f64, &cfg.limits))
        .collect()
}

pub fn run_episode(
    scene: &Scene,
    task: &Task,
    policy: &dyn Policy,
    cfg: &ExecutorConfig,
    kinematics: Kinematics,
) -> Result<EpisodeResult, ControlError> {
    cfg.validate()?;
    let mut state = RobotState::new(task.start, task.robot_radius, kinematics);
    let target = scene
        .object(task.target_id)
        .ok_or_else(|| ControlError::InvalidConfig(format!("target {} not in scene", task.target_id)))?
        .clone();
    state.tilt = tilt_step(
        &RobotState { tilt: 0.0, ..state },
        &cfg.camera,
        target.lowest_point(state.pose.position()),
        &ExecutorConfig { max_tilt_slew: f64::INFINITY, ..*cfg },
    );
    let mut traj: Vec<Pose2> = Vec::new();
    let mut cursor = 0usize;
    let mut traj_id = 0usize;
    let mut queries = 0usize;
    let mut min_clear = clearance(scene, state.pose.position(), state.radius);
    let mut trace = Vec::new();
    let mut step = 0usize;
    // A robot that never moved has not come to a stop.
    let mut moved = false;

    let outcome = loop {
        if !traj.is_empty() {
            while cursor < traj.len() - 1 && traj[cursor].distance_to(&state.pose) <= PASS_TOL {
                cursor += 1;
            }
            let cmd = pure_pursuit(&state, &traj[cursor..], cfg)?;
            let end = traj[traj.len() - 1];
            let at_end = traj[cursor..].iter().all(|p| p.distance_to(&end) <= cfg.stop_pos_tol);
            if moved && cmd.is_zero() && at_end && ends_in_hold(&traj, cfg) {
                break Outcome::Reached;
            }
        }
        if step >= cfg.max_steps {
            break Outcome::Timeout;
        }
        if step.is_multiple_of(cfg.replan_every) {
            let scan = raycast_lidar(scene, &state.pose, cfg.lidar.num_rays, cfg.lidar.max_range);
            let input = PolicyInput {
                scene,
                state: &state,
                scan: &scan,
                task,
                step,
            };
            match policy.query(&input) {
                Ok(out) => {
                    queries += 1;
                    traj_id += 1;
                    traj = decode_trajectory(&state.pose, &out.steps, true);
                    cursor = 0;
                    while cursor < traj.len() - 1 && traj[cursor].distance_to(&state.pose) <= PASS_TOL {
                        cursor += 1;
                    }
                }
                Err(e) => {
                    log::debug!("task {}: policy failed at step {step}: {e}", task.seed);
                    break Outcome::NoPath;
                }
            }
            if traj.is_empty() {
                break Outcome::NoPath;
            }
        }
        let cmd = pure_pursuit(&state, &traj[cursor..], cfg)?;
        moved |= !cmd.is_zero();
        let sub = swept_states(&state, &cmd, cfg)
            .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;
        step += 1;
        let mut hit = false;
        for s in &sub {
            min_clear = min_clear.min(clearance(scene, s.pose.position(), s.radius));
            if collision_check(scene, &s.pose, s.radius) {
                state = *s;
                hit = true;
                break;
            }
        }
        if !hit {
            state = *sub.last().expect("at least one sub-step");
        }
        state.tilt = tilt_step(&state, &cfg.camera, target.lowest_point(state.pose.position()), cfg);
        trace.push(TraceEntry {
            step,
            pose: state.pose,
            tilt: state.tilt,
            traj_id,
            command: cmd,
        });
        if hit {
            break Outcome::Collision;
        }
    };
    let (distance_error, angle_error) = pose_error(&state.pose, &task.goal_pose);
    Ok(EpisodeResult {
        task_seed: task.seed,
        outcome,
        final_pose: state.pose,
        distance_error,
        angle_error,
        steps: step,
        policy_queries: queries,
        min_clearance: min_clear,
        trace,
    })
}
