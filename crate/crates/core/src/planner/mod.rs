//! Expert planning in the zero-turning-radius Reeds-Shepp space.
//!
//! With a turning radius of zero every optimal connection degenerates to
//! rotate in place, drive straight (forwards or backwards), rotate in place.
//! Costs add a per-meter surcharge for reversing and a look-at penalty that
//! integrates the heading deviation from the target bearing over forward
//! motion.

mod search;

pub use search::{plan, Budget, PlannerConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{se2_compose, se2_relative, wrap_angle, Pose2};

/// Dense path spacing.
pub const DENSE_STEP_M: f64 = 0.01;
pub const DENSE_STEP_RAD: f64 = std::f64::consts::PI / 180.0;

/// Keyframe gaps.
pub const KEYFRAME_GAP_M: f64 = 0.2;
pub const KEYFRAME_GAP_RAD: f64 = 5.0 * std::f64::consts::PI / 180.0;

const GAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path found within budget")]
    NoPathFound,
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("pose is {distance:.3} m from the path")]
    OffPath { distance: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSegment {
    Rotate { dtheta: f64 },
    Translate { ds: f64 },
}

impl PathSegment {
    pub fn apply(&self, pose: &Pose2) -> Pose2 {
        match *self {
            PathSegment::Rotate { dtheta } => Pose2::new(pose.x, pose.y, pose.heading + dtheta),
            PathSegment::Translate { ds } => se2_compose(pose, &Pose2::new(ds, 0.0, 0.0)),
        }
    }

    /// Pose reached after moving `fraction` of the segment.
    pub fn interpolate(&self, pose: &Pose2, fraction: f64) -> Pose2 {
        match *self {
            PathSegment::Rotate { dtheta } => {
                Pose2::new(pose.x, pose.y, pose.heading + fraction * dtheta)
            }
            PathSegment::Translate { ds } => se2_compose(pose, &Pose2::new(fraction * ds, 0.0, 0.0)),
        }
    }

    fn dense_count(&self) -> usize {
        let n = match *self {
            PathSegment::Rotate { dtheta } => dtheta.abs() / DENSE_STEP_RAD,
            PathSegment::Translate { ds } => ds.abs() / DENSE_STEP_M,
        };
        ((n - 1e-9).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_translate: f64,
    pub w_rotate: f64,
    pub w_backward: f64,
    pub w_lookat: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_translate: 1.0,
            w_rotate: 0.3,
            w_backward: 2.0,
            w_lookat: 0.5,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.w_translate > 0.0
            && self.w_rotate >= 0.0
            && self.w_backward >= 0.0
            && self.w_lookat >= 0.0
        {
            Ok(())
        } else {
            Err(PlanError::InvalidArgument(format!("invalid cost weights {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub start: Pose2,
    pub segments: Vec<PathSegment>,
    pub states: Vec<Pose2>,
    pub cost: f64,
}

impl PlannedPath {
    pub fn from_segments(
        start: Pose2,
        segments: Vec<PathSegment>,
        target_center: [f64; 2],
        w: &CostWeights,
    ) -> Self {
        let mut path = Self {
            start,
            states: dense_states(&start, &segments),
            segments,
            cost: 0.0,
        };
        path.cost = path_cost(&path, target_center, w);
        path
    }

    pub fn end(&self) -> Pose2 {
        self.segments.iter().fold(self.start, |p, s| s.apply(&p))
    }

    pub fn translation_length(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                PathSegment::Translate { ds } => ds.abs(),
                PathSegment::Rotate { .. } => 0.0,
            })
            .sum()
    }
}

fn dense_segment(start: &Pose2, seg: &PathSegment, out: &mut Vec<Pose2>) {
    let n = seg.dense_count();
    for i in 1..=n {
        out.push(seg.interpolate(start, i as f64 / n as f64));
    }
}

/// Dense states from `start` along `segments` (start included).
pub fn dense_states(start: &Pose2, segments: &[PathSegment]) -> Vec<Pose2> {
    let mut out = vec![*start];
    let mut pose = *start;
    for seg in segments {
        dense_segment(&pose, seg, &mut out);
        pose = seg.apply(&pose);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Rotate-translate-rotate amounts for one driving direction.
fn branch(a: &Pose2, b: &Pose2, dir: Direction) -> (f64, f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let dist = dx.hypot(dy);
    if dist < 1e-9 {
        return (wrap_angle(b.heading - a.heading), 0.0, 0.0);
    }
    let bearing = match dir {
        Direction::Forward => dy.atan2(dx),
        Direction::Backward => dy.atan2(dx) + std::f64::consts::PI,
    };
    let ds = match dir {
        Direction::Forward => dist,
        Direction::Backward => -dist,
    };
    (
        wrap_angle(bearing - a.heading),
        ds,
        wrap_angle(b.heading - bearing),
    )
}

fn branch_cost((r1, ds, r2): (f64, f64, f64), w: &CostWeights) -> f64 {
    let back = if ds < 0.0 { w.w_backward * ds.abs() } else { 0.0 };
    w.w_translate * ds.abs() + back + w.w_rotate * (r1.abs() + r2.abs())
}

/// Cost of the cheaper of the forward and backward rotate-translate-rotate
/// connections, excluding the look-at term.
pub fn rs0_distance(a: &Pose2, b: &Pose2, w: &CostWeights) -> f64 {
    let f = branch_cost(branch(a, b, Direction::Forward), w);
    let r = branch_cost(branch(a, b, Direction::Backward), w);
    f.min(r)
}

/// Segments realizing the branch chosen by [`rs0_distance`] under `w`.
pub fn steer_weighted(a: &Pose2, b: &Pose2, w: &CostWeights, allow_backward: bool) -> Vec<PathSegment> {
    let fwd = branch(a, b, Direction::Forward);
    let chosen = if allow_backward {
        let bwd = branch(a, b, Direction::Backward);
        if branch_cost(bwd, w) < branch_cost(fwd, w) {
            bwd
        } else {
            fwd
        }
    } else {
        fwd
    };
    let (r1, ds, r2) = chosen;
    let mut segs = Vec::with_capacity(3);
    if r1.abs() > 1e-12 {
        segs.push(PathSegment::Rotate { dtheta: r1 });
    }
    if ds.abs() > 1e-12 {
        segs.push(PathSegment::Translate { ds });
    }
    if r2.abs() > 1e-12 {
        segs.push(PathSegment::Rotate { dtheta: r2 });
    }
    segs
}

/// [`steer_weighted`] with the default cost weights.
pub fn steer(a: &Pose2, b: &Pose2, allow_backward: bool) -> Vec<PathSegment> {
    steer_weighted(a, b, &CostWeights::default(), allow_backward)
}

fn lookat_deviation(p: &Pose2, target: [f64; 2]) -> f64 {
    let bearing = (target[1] - p.y).atan2(target[0] - p.x);
    wrap_angle(p.heading - bearing).abs()
}

/// Exact ∫|heading − bearing| ds along a forward translation of length `len`.
fn lookat_integral_exact(start: &Pose2, len: f64, target: [f64; 2]) -> f64 {
    let (s, c) = start.heading.sin_cos();
    let rx = target[0] - start.x;
    let ry = target[1] - start.y;
    let px = rx * c + ry * s;
    let q = (ry * c - rx * s).abs();
    if q < 1e-12 {
        return std::f64::consts::PI * (len - px.clamp(0.0, len));
    }
    let f = |x: f64| std::f64::consts::FRAC_PI_2 * x - x * (x / q).atan() + 0.5 * q * (q * q + x * x).ln();
    f(px) - f(px - len)
}

/// Like `segment_cost` but integrates the look-at term in closed form.
/// Used for graph edge weights; returned paths are costed by `path_cost`.
pub(crate) fn segment_cost_exact(start: &Pose2, seg: &PathSegment, target: [f64; 2], w: &CostWeights) -> (f64, Pose2) {
    match *seg {
        PathSegment::Translate { ds } if ds > 0.0 && w.w_lookat > 0.0 => (
            w.w_translate * ds + w.w_lookat * lookat_integral_exact(start, ds, target),
            seg.apply(start),
        ),
        _ => segment_cost(start, seg, target, w),
    }
}

/// Cost of one segment starting at `start`; returns the cost and end pose.
pub fn segment_cost(start: &Pose2, seg: &PathSegment, target: [f64; 2], w: &CostWeights) -> (f64, Pose2) {
    let end = seg.apply(start);
    let cost = match *seg {
        PathSegment::Rotate { dtheta } => w.w_rotate * dtheta.abs(),
        PathSegment::Translate { ds } => {
            let mut c = w.w_translate * ds.abs();
            if ds < 0.0 {
                c += w.w_backward * ds.abs();
            } else if w.w_lookat > 0.0 {
                let n = seg.dense_count();
                let h = ds / n as f64;
                let mut prev = lookat_deviation(start, target);
                let mut integral = 0.0;
                for i in 1..=n {
                    let p = seg.interpolate(start, i as f64 / n as f64);
                    let cur = lookat_deviation(&p, target);
                    integral += 0.5 * (prev + cur) * h;
                    prev = cur;
                }
                c += w.w_lookat * integral;
            }
            c
        }
    };
    (cost, end)
}

/// Translation, rotation and backward terms plus the look-at integral
/// (trapezoid on the dense states of forward translations).
pub fn path_cost(path: &PlannedPath, target_center: [f64; 2], w: &CostWeights) -> f64 {
    let mut pose = path.start;
    let mut total = 0.0;
    for seg in &path.segments {
        let (c, end) = segment_cost(&pose, seg, target_center, w);
        total += c;
        pose = end;
    }
    total
}

/// Keyframes along the dense path: a new keyframe whenever the pose has
/// moved at least 0.2 m or turned at least 5 degrees from the last one.
/// The first and final states are always included.
pub fn resample_keyframes(path: &PlannedPath) -> Vec<Pose2> {
    let Some(first) = path.states.first() else {
        return Vec::new();
    };
    let mut keys = vec![*first];
    let mut last_idx = 0;
    for (i, s) in path.states.iter().enumerate().skip(1) {
        let k = keys.last().expect("nonempty");
        let moved = s.distance_to(k) >= KEYFRAME_GAP_M - GAP_SLACK;
        let turned = wrap_angle(s.heading - k.heading).abs() >= KEYFRAME_GAP_RAD - GAP_SLACK;
        if moved || turned {
            keys.push(*s);
            last_idx = i;
        }
    }
    if last_idx + 1 != path.states.len() {
        keys.push(*path.states.last().expect("nonempty"));
    }
    keys
}

/// True when consecutive keyframes respect the gap rule (the final pair is exempt).
pub fn keyframe_gaps_ok(keys: &[Pose2]) -> bool {
    if keys.len() < 3 {
        return true;
    }
    keys[..keys.len() - 1].windows(2).all(|w| {
        w[0].distance_to(&w[1]) >= KEYFRAME_GAP_M - 1e-6
            || wrap_angle(w[1].heading - w[0].heading).abs() >= KEYFRAME_GAP_RAD - 1e-6
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub horizon: usize,
    pub dt: f64,
    pub v_ref: f64,
    pub omega_ref: f64,
    /// Maximum distance between the current pose and its projection onto the path.
    pub max_offset: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            dt: 0.2,
            v_ref: 0.5,
            omega_ref: 1.0,
            max_offset: 0.3,
        }
    }
}

/// Segment index and completed fraction for every dense state.
fn dense_index(segments: &[PathSegment]) -> Vec<(usize, f64)> {
    let mut idx = vec![(0, 0.0)];
    for (k, seg) in segments.iter().enumerate() {
        let n = seg.dense_count();
        for i in 1..=n {
            idx.push((k, i as f64 / n as f64));
        }
    }
    idx
}

/// Remaining path from the projection of `current`, as segments starting at `current`.
pub fn remaining_segments(path: &PlannedPath, current: &Pose2, max_offset: f64) -> Result<Vec<PathSegment>, PlanError> {
    const HEADING_WEIGHT: f64 = 0.1;
    let (j, proj_dist) = path
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = s.distance_to(current);
            (i, d, d + HEADING_WEIGHT * wrap_angle(s.heading - current.heading).abs())
        })
        .fold((0usize, f64::INFINITY, f64::INFINITY), |best, (i, d, score)| {
            if score < best.2 {
                (i, d, score)
            } else {
                best
            }
        })
        .pipe(|(i, d, _)| (i, d));
    if !(proj_dist <= max_offset) {
        return Err(PlanError::OffPath { distance: proj_dist });
    }
    let anchor = path.states[j];
    let mut segs = Vec::new();
    if anchor.distance_to(current) > 1e-12 || wrap_angle(anchor.heading - current.heading).abs() > 1e-12 {
        segs.extend(steer(current, &anchor, true));
    }
    if !path.segments.is_empty() {
        let (k, frac) = dense_index(&path.segments)[j];
        let rest = 1.0 - frac;
        if rest > 1e-12 {
            segs.push(match path.segments[k] {
                PathSegment::Rotate { dtheta } => PathSegment::Rotate { dtheta: dtheta * rest },
                PathSegment::Translate { ds } => PathSegment::Translate { ds: ds * rest },
            });
        }
        segs.extend_from_slice(&path.segments[k + 1..]);
    }
    Ok(segs)
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}

/// Poses at `t = dt, 2dt, ...` along segments driven at `v_ref` / `omega_ref`,
/// holding the end pose once reached (world frame).
pub fn sample_timed(start: &Pose2, segments: &[PathSegment], timing: &TimingConfig) -> Vec<Pose2> {
    let durations: Vec<f64> = segments
        .iter()
        .map(|s| match *s {
            PathSegment::Rotate { dtheta } => dtheta.abs() / timing.omega_ref,
            PathSegment::Translate { ds } => ds.abs() / timing.v_ref,
        })
        .collect();
    let mut out = Vec::with_capacity(timing.horizon);
    let mut seg_start = *start;
    let mut k = 0;
    let mut elapsed = 0.0;
    for i in 1..=timing.horizon {
        let t = i as f64 * timing.dt;
        while k < segments.len() && elapsed + durations[k] <= t {
            elapsed += durations[k];
            seg_start = segments[k].apply(&seg_start);
            k += 1;
        }
        if k == segments.len() {
            out.push(seg_start);
        } else {
            let f = ((t - elapsed) / durations[k]).clamp(0.0, 1.0);
            out.push(segments[k].interpolate(&seg_start, f));
        }
    }
    out
}

/// Next `horizon` waypoints along the remaining path, each expressed in the
/// frame of its predecessor (the first relative to `current`).
pub fn waypoints_from_path(
    path: &PlannedPath,
    current: &Pose2,
    timing: &TimingConfig,
) -> Result<Vec<Pose2>, PlanError> {
    if !(timing.dt > 0.0 && timing.v_ref > 0.0 && timing.omega_ref > 0.0) {
        return Err(PlanError::InvalidArgument("timing values must be positive".into()));
    }
    if timing.v_ref * timing.dt > crate::codec::R_MAX + 1e-12 {
        return Err(PlanError::InvalidArgument(format!(
            "v_ref * dt = {} exceeds the per-step range {}",
            timing.v_ref * timing.dt,
            crate::codec::R_MAX
        )));
    }
    let segs = remaining_segments(path, current, timing.max_offset)?;
    let world = sample_timed(current, &segs, timing);
    Ok(chain_relative(current, &world))
}

/// Expresses world poses as a chain of predecessor-relative steps.
pub fn chain_relative(base: &Pose2, world: &[Pose2]) -> Vec<Pose2> {
    let mut prev = *base;
    world
        .iter()
        .map(|p| {
            let rel = se2_relative(&prev, p);
            prev = *p;
            rel
        })
        .collect()
}

/// Inverse of [`chain_relative`].
pub fn chain_to_world(base: &Pose2, steps: &[Pose2]) -> Vec<Pose2> {
    let mut prev = *base;
    steps
        .iter()
        .map(|s| {
            prev = se2_compose(&prev, s);
            prev
        })
        .collect()
}
