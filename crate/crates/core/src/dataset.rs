//! Task sampling, expert demonstrations, relabeling and JSONL datasets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode_trajectory, CodecError, TokenizedStep};
use crate::geometry::{
    derive_goal_pose, determine_front_side, tilt_setpoint, CameraModel, FrontSideConfig, GoalSpec,
    Pose2, Side, SideLabels, TiltLimits, APPROACH_ANGLES_DEG,
};
use crate::planner::{
    keyframe_gaps_ok, plan, resample_keyframes, waypoints_from_path, Budget, PlanError, PlannedPath,
    PlannerConfig, TimingConfig,
};
use crate::scene::{collision_check, raycast_lidar, visible_from, LidarConfig, LidarScan, Scene, VisibilityConfig};

pub const DATASET_VERSION: &str = "episode-v1";
pub const GENERATOR_VERSION: &str = concat!("navkit-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum DataError {
    #[error("scene has no target-eligible objects")]
    NoEligibleTarget,
    #[error("task sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("target object {0} not in scene")]
    MissingTarget(u32),
    #[error("record {index}: schema mismatch: {reason}")]
    SchemaMismatch { index: usize, reason: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub seed: u64,
    pub scene_seed: u64,
    pub start: Pose2,
    pub robot_radius: f64,
    pub reference_view: Pose2,
    pub target_id: u32,
    pub side_labels: SideLabels,
    pub goal_spec: GoalSpec,
    pub goal_pose: Pose2,
    pub ffr: bool,
    pub initially_visible: bool,
}

impl Task {
    pub fn target_center(&self, scene: &Scene) -> Result<[f64; 2], DataError> {
        scene
            .object(self.target_id)
            .map(|o| o.shape.center())
            .ok_or(DataError::MissingTarget(self.target_id))
    }

    /// Start-to-target-center distance.
    pub fn initial_distance(&self, scene: &Scene) -> Result<f64, DataError> {
        let c = self.target_center(scene)?;
        Ok((c[0] - self.start.x).hypot(c[1] - self.start.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub radius_min: f64,
    pub radius_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub p_ffr: f64,
    pub max_target_distance: f64,
    pub max_attempts: usize,
    pub front_side: FrontSideConfig,
    pub visibility: VisibilityConfig,
    /// Planner budget for the reachability probe.
    pub probe_batches: usize,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            radius_min: 0.1,
            radius_max: 0.5,
            d_min: 0.1,
            d_max: 0.5,
            p_ffr: 0.5,
            max_target_distance: 10.0,
            max_attempts: 200,
            front_side: FrontSideConfig::default(),
            visibility: VisibilityConfig::default(),
            probe_batches: 2,
        }
    }
}

/// Everything needed to turn a task into a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub planner: PlannerConfig,
    pub timing: TimingConfig,
    pub lidar: LidarConfig,
    pub camera: CameraModel,
    pub tilt_limits: TiltLimits,
    /// Extra clearance the expert keeps from obstacles when it can.
    pub plan_margin: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            timing: TimingConfig::default(),
            lidar: LidarConfig::default(),
            camera: CameraModel::default(),
            tilt_limits: TiltLimits::default(),
            plan_margin: 0.02,
        }
    }
}

fn sample_free_pose(rng: &mut ChaCha8Rng, scene: &Scene, radius: f64) -> Option<Pose2> {
    let b = scene.bounds;
    if b.w <= 2.0 * radius || b.h <= 2.0 * radius {
        return None;
    }
    for _ in 0..100 {
        let p = Pose2::new(
            rng.gen_range(radius..b.w - radius),
            rng.gen_range(radius..b.h - radius),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if !collision_check(scene, &p, radius) {
            return Some(p);
        }
    }
    None
}

pub fn sample_task(
    scene: &Scene,
    rng_seed: u64,
    params: &TaskParams,
    camera: &CameraModel,
) -> Result<Task, DataError> {
    if !scene.objects.iter().any(|o| o.target_eligible) {
        return Err(DataError::NoEligibleTarget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let probe = PlannerConfig {
        budget: Budget::Iterations(params.probe_batches),
        batch_size: 50,
        ..Default::default()
    };
    for attempt in 0..params.max_attempts {
        let radius = rng.gen_range(params.radius_min..=params.radius_max);
        let Some(start) = sample_free_pose(&mut rng, scene, radius) else {
            continue;
        };
        let ffr = rng.gen_bool(params.p_ffr);
        let reference_view = if ffr {
            start
        } else {
            match sample_free_pose(&mut rng, scene, radius) {
                Some(p) => p,
                None => continue,
            }
        };
        let candidates: Vec<_> = scene
            .objects
            .iter()
            .filter(|o| o.target_eligible)
            .filter(|o| {
                let c = o.shape.center();
                (c[0] - start.x).hypot(c[1] - start.y) < params.max_target_distance
            })
            .filter(|o| visible_from(&reference_view, camera, o, scene, &params.visibility))
            .collect();
        let Some(target) = candidates.choose(&mut rng) else {
            continue;
        };
        let Ok(labels) = determine_front_side(&target.shape, &reference_view, &params.front_side) else {
            continue;
        };
        let side = Side::ALL[rng.gen_range(0..4)];
        let distance_d = rng.gen_range(params.d_min..=params.d_max);
        let angle_theta = APPROACH_ANGLES_DEG[rng.gen_range(0..APPROACH_ANGLES_DEG.len())].to_radians();
        let goal_spec = GoalSpec {
            side,
            distance_d,
            angle_theta,
        };
        let Ok(goal_pose) = derive_goal_pose(&target.shape, &labels, &goal_spec, radius) else {
            continue;
        };
        if collision_check(scene, &goal_pose, radius) {
            continue;
        }
        let center = target.shape.center();
        if plan(scene, &start, &goal_pose, radius, center, &probe, rng_seed ^ attempt as u64).is_err() {
            log::debug!("task seed {rng_seed}: attempt {attempt} unreachable goal");
            continue;
        }
        let initially_visible = visible_from(&start, camera, target, scene, &params.visibility);
        return Ok(Task {
            seed: rng_seed,
            scene_seed: scene.seed,
            start,
            robot_radius: radius,
            reference_view,
            target_id: target.id,
            side_labels: labels,
            goal_spec,
            goal_pose,
            ffr,
            initially_visible,
        });
    }
    Err(DataError::SamplingExhausted(params.max_attempts))
}

/// Expert plan for a task from `from`, keeping the configured margin when possible.
pub fn expert_plan(
    scene: &Scene,
    task: &Task,
    from: &Pose2,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<PlannedPath, DataError> {
    let center = task.target_center(scene)?;
    let r = task.robot_radius;
    if cfg.plan_margin > 0.0 {
        match plan(scene, from, &task.goal_pose, r + cfg.plan_margin, center, &cfg.planner, seed) {
            Ok(p) => return Ok(p),
            Err(e) => log::debug!("task {}: margin plan failed ({e}), retrying without", task.seed),
        }
    }
    Ok(plan(scene, from, &task.goal_pose, r, center, &cfg.planner, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub pose: Pose2,
    pub tilt: f64,
    pub lidar: LidarScan,
    pub expert_steps: Vec<TokenizedStep>,
    pub expert_tilt_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub version: String,
    pub task: Task,
    pub keyframes: Vec<Keyframe>,
    pub planner_cost: f64,
    pub generator_version: String,
}

/// Tilt rule for the task target as seen from `pose`, clamped to the limits.
pub fn tilt_for(scene: &Scene, task: &Task, pose: &Pose2, cfg: &ExpertConfig) -> Result<f64, DataError> {
    let target = scene
        .object(task.target_id)
        .ok_or(DataError::MissingTarget(task.target_id))?;
    let p = target.lowest_point(pose.position());
    Ok(cfg.tilt_limits.clamp(tilt_setpoint(&cfg.camera, pose, p)))
}

/// Expert tokens along `path` from `pose`.
pub fn expert_steps(path: &PlannedPath, pose: &Pose2, cfg: &ExpertConfig) -> Result<Vec<TokenizedStep>, DataError> {
    let steps = waypoints_from_path(path, pose, &cfg.timing)?;
    Ok(encode_trajectory(&steps)?)
}

pub fn generate_episode(scene: &Scene, task: &Task, cfg: &ExpertConfig) -> Result<EpisodeRecord, DataError> {
    let path = expert_plan(scene, task, &task.start, cfg, task.seed)?;
    let keyframes = resample_keyframes(&path)
        .into_iter()
        .map(|pose| {
            let steps = waypoints_from_path(&path, &pose, &cfg.timing)?;
            let first = steps
                .first()
                .map(|s| crate::geometry::se2_compose(&pose, s))
                .unwrap_or(pose);
            Ok(Keyframe {
                pose,
                tilt: tilt_for(scene, task, &pose, cfg)?,
                lidar: raycast_lidar(scene, &pose, cfg.lidar.num_rays, cfg.lidar.max_range),
                expert_steps: encode_trajectory(&steps)?,
                expert_tilt_target: tilt_for(scene, task, &first, cfg)?,
            })
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(EpisodeRecord {
        version: DATASET_VERSION.to_string(),
        task: task.clone(),
        keyframes,
        planner_cost: path.cost,
        generator_version: GENERATOR_VERSION.to_string(),
    })
}

/// Expert tokens from an arbitrary state: replans to the task goal.
pub fn relabel_from_state(
    scene: &Scene,
    task: &Task,
    pose: &Pose2,
    cfg: &ExpertConfig,
) -> Result<Vec<TokenizedStep>, DataError> {
    let path = expert_plan(scene, task, pose, cfg, task.seed)?;
    expert_steps(&path, pose, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub master_seed: u64,
    pub scene_count: usize,
    pub record_count: usize,
    pub config_hash: String,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes records as JSONL plus the manifest next to it.
pub fn write_dataset(
    records: &[EpisodeRecord],
    path: &Path,
    master_seed: u64,
    scene_count: usize,
    config_hash: &str,
) -> Result<Manifest, DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let manifest = Manifest {
        version: DATASET_VERSION.to_string(),
        master_seed,
        scene_count,
        record_count: records.len(),
        config_hash: config_hash.to_string(),
    };
    let mpath = manifest_path(path);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
        .map_err(io_err(&mpath))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DataError> {
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Manifest(e.to_string()))?;
    if m.version != DATASET_VERSION {
        return Err(DataError::Manifest(format!("version {:?}", m.version)));
    }
    Ok(m)
}

/// Reads a dataset; `strict` re-audits the keyframe spacing of every record.
pub fn read_dataset(path: &Path, strict: bool) -> Result<(Vec<EpisodeRecord>, Manifest), DataError> {
    let manifest = read_manifest(path)?;
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(&line).map_err(|e| DataError::SchemaMismatch {
            index,
            reason: e.to_string(),
        })?;
        if rec.version != DATASET_VERSION {
            return Err(DataError::SchemaMismatch {
                index,
                reason: format!("version {:?}, expected {DATASET_VERSION:?}", rec.version),
            });
        }
        for kf in &rec.keyframes {
            for t in &kf.expert_steps {
                t.check_bins().map_err(|e| DataError::SchemaMismatch {
                    index,
                    reason: e.to_string(),
                })?;
            }
        }
        if strict {
            let poses: Vec<Pose2> = rec.keyframes.iter().map(|k| k.pose).collect();
            if !keyframe_gaps_ok(&poses) {
                return Err(DataError::SchemaMismatch {
                    index,
                    reason: "keyframe spacing below 0.2 m / 5 deg".into(),
                });
            }
        }
        records.push(rec);
    }
    if records.len() != manifest.record_count {
        return Err(DataError::Manifest(format!(
            "manifest lists {} records, file has {}",
            manifest.record_count,
            records.len()
        )));
    }
    Ok((records, manifest))
}
