//! Exact constant-command integration for the supported drive types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kinematics {
    #[default]
    Differential,
    Omnidirectional,
    Ackermann { wheelbase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    Differential { v: f64, omega: f64 },
    Omnidirectional { vx: f64, vy: f64, omega: f64 },
    Ackermann { v: f64, steering: f64 },
}

impl Command {
    pub fn zero(kind: &Kinematics) -> Self {
        match kind {
            Kinematics::Differential => Command::Differential { v: 0.0, omega: 0.0 },
            Kinematics::Omnidirectional => Command::Omnidirectional {
                vx: 0.0,
                vy: 0.0,
                omega: 0.0,
            },
            Kinematics::Ackermann { .. } => Command::Ackermann { v: 0.0, steering: 0.0 },
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Command::Differential { v, omega } => v == 0.0 && omega == 0.0,
            Command::Omnidirectional { vx, vy, omega } => vx == 0.0 && vy == 0.0 && omega == 0.0,
            Command::Ackermann { v, .. } => v == 0.0,
        }
    }

    pub fn linear_speed(&self) -> f64 {
        match *self {
            Command::Differential { v, .. } | Command::Ackermann { v, .. } => v.abs(),
            Command::Omnidirectional { vx, vy, .. } => vx.hypot(vy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicLimits {
    pub max_speed: f64,
    pub max_omega: f64,
    pub max_steering: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            max_speed: 1.0,
            max_omega: 1.5,
            max_steering: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2,
    pub radius: f64,
    pub tilt: f64,
    pub kinematics: Kinematics,
}

impl RobotState {
    pub fn new(pose: Pose2, radius: f64, kinematics: Kinematics) -> Self {
        Self {
            pose,
            radius,
            tilt: 0.0,
            kinematics,
        }
    }
}

const LIMIT_SLACK: f64 = 1e-9;

/// Body-frame displacement after moving with constant twist `(vx, vy, omega)` for `dt`.
fn twist_displacement(vx: f64, vy: f64, omega: f64, dt: f64) -> (f64, f64, f64) {
    let th = omega * dt;
    if th.abs() < 1e-9 {
        // Second-order series keeps the small-angle branch continuous.
        let s = dt * (1.0 - th * th / 6.0);
        let c = dt * (th / 2.0);
        (s * vx - c * vy, c * vx + s * vy, th)
    } else {
        let s = th.sin() / omega;
        let c = (1.0 - th.cos()) / omega;
        (s * vx - c * vy, c * vx + s * vy, th)
    }
}

pub fn step_kinematics(
    state: &RobotState,
    cmd: &Command,
    dt: f64,
    limits: &KinematicLimits,
) -> Result<RobotState, KinematicsError> {
    if !(dt > 0.0) {
        return Err(KinematicsError::InvalidCommand(format!("dt must be positive, got {dt}")));
    }
    let check = |name: &str, value: f64, max: f64| {
        if !value.is_finite() || value.abs() > max + LIMIT_SLACK {
            Err(KinematicsError::InvalidCommand(format!(
                "{name} {value} exceeds limit {max}"
            )))
        } else {
            Ok(())
        }
    };
    let (vx, vy, omega) = match (state.kinematics, *cmd) {
        (Kinematics::Differential, Command::Differential { v, omega }) => {
            check("speed", v, limits.max_speed)?;
            check("omega", omega, limits.max_omega)?;
            (v, 0.0, omega)
        }
        (Kinematics::Omnidirectional, Command::Omnidirectional { vx, vy, omega }) => {
            check("speed", vx.hypot(vy), limits.max_speed)?;
            check("omega", omega, limits.max_omega)?;
            (vx, vy, omega)
        }
        (Kinematics::Ackermann { wheelbase }, Command::Ackermann { v, steering }) => {
            check("speed", v, limits.max_speed)?;
            check("steering", steering, limits.max_steering)?;
            (v, 0.0, v * steering.tan() / wheelbase)
        }
        (k, c) => {
            return Err(KinematicsError::InvalidCommand(format!(
                "command {c:?} does not match kinematics {k:?}"
            )))
        }
    };
    let (dx, dy, dth) = twist_displacement(vx, vy, omega, dt);
    let [x, y] = state.pose.transform_point([dx, dy]);
    Ok(RobotState {
        pose: Pose2::new(x, y, state.pose.heading + dth),
        ..*state
    })
}
