//! Procedural 2D rooms of oriented-box obstacles and the queries the rest of
//! the pipeline runs against them: disc collision, swept collision, LiDAR
//! raycasting and camera visibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, CameraModel, OrientedBox, Pose2};

pub const SCENE_VERSION: &str = "scene-v1";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("scene schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// Room rectangle `[0, w] x [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub w: f64,
    pub h: f64,
}

impl Bounds {
    /// Signed distance from a point to the room boundary, positive inside.
    pub fn interior_distance(&self, p: [f64; 2]) -> f64 {
        p[0].min(self.w - p[0]).min(p[1]).min(self.h - p[1])
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    #[serde(flatten)]
    pub shape: OrientedBox,
    #[serde(default)]
    pub base_height: f64,
    pub category: String,
    pub target_eligible: bool,
}

impl SceneObject {
    /// Lowest point of the object as seen from `from`: the footprint corner
    /// nearest to it, at the object's base height.
    pub fn lowest_point(&self, from: [f64; 2]) -> [f64; 3] {
        let c = self
            .shape
            .corners()
            .into_iter()
            .min_by(|a, b| {
                let da = (a[0] - from[0]).hypot(a[1] - from[1]);
                let db = (b[0] - from[0]).hypot(b[1] - from[1]);
                da.total_cmp(&db)
            })
            .unwrap_or(self.shape.center());
        [c[0], c[1], self.base_height]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub version: String,
    pub seed: u64,
    pub bounds: Bounds,
    pub walls: Vec<OrientedBox>,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Room with four walls of the given thickness hugging the bounds from outside.
    pub fn empty_room(w: f64, h: f64, seed: u64) -> Self {
        Self {
            version: SCENE_VERSION.to_string(),
            seed,
            bounds: Bounds { w, h },
            walls: perimeter_walls(w, h, 0.2),
            objects: Vec::new(),
        }
    }

    pub fn with_objects(mut self, objects: Vec<SceneObject>) -> Self {
        self.objects = objects;
        self
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn boxes(&self) -> impl Iterator<Item = &OrientedBox> {
        self.walls.iter().chain(self.objects.iter().map(|o| &o.shape))
    }

    pub fn free_area(&self) -> f64 {
        self.bounds.area() - self.objects.iter().map(|o| o.shape.area()).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.version != SCENE_VERSION {
            return Err(SceneError::SchemaMismatch(format!(
                "version {:?}, expected {SCENE_VERSION:?}",
                self.version
            )));
        }
        if !(self.bounds.w > 0.0 && self.bounds.h > 0.0) {
            return Err(SceneError::Invalid("bounds must be positive".into()));
        }
        for b in self.boxes() {
            if !(b.hx > 0.0 && b.hy > 0.0) {
                return Err(SceneError::Invalid("box half extents must be positive".into()));
            }
        }
        let room = OrientedBox {
            cx: self.bounds.w / 2.0,
            cy: self.bounds.h / 2.0,
            hx: self.bounds.w / 2.0,
            hy: self.bounds.h / 2.0,
            yaw: 0.0,
        };
        let mut ids = std::collections::HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return Err(SceneError::Invalid(format!("duplicate object id {}", o.id)));
            }
            if !room.overlaps(&o.shape) {
                return Err(SceneError::Invalid(format!("object {} outside bounds", o.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SceneError> {
        let scene: Scene =
            serde_json::from_str(s).map_err(|e| SceneError::SchemaMismatch(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }
}

fn perimeter_walls(w: f64, h: f64, t: f64) -> Vec<OrientedBox> {
    let ht = t / 2.0;
    vec![
        OrientedBox { cx: -ht, cy: h / 2.0, hx: ht, hy: h / 2.0 + t, yaw: 0.0 },
        OrientedBox { cx: w + ht, cy: h / 2.0, hx: ht, hy: h / 2.0 + t, yaw: 0.0 },
        OrientedBox { cx: w / 2.0, cy: -ht, hx: w / 2.0 + t, hy: ht, yaw: 0.0 },
        OrientedBox { cx: w / 2.0, cy: h + ht, hx: w / 2.0 + t, hy: ht, yaw: 0.0 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub room_min: f64,
    pub room_max: f64,
    pub objects_min: usize,
    pub objects_max: usize,
    /// Full object edge length range.
    pub size_min: f64,
    pub size_max: f64,
    pub min_clearance: f64,
    pub min_free_area: f64,
    pub wall_thickness: f64,
    pub eligible_fraction: f64,
    pub base_height_max: f64,
    pub max_attempts: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            room_min: 6.0,
            room_max: 12.0,
            objects_min: 5,
            objects_max: 15,
            size_min: 0.2,
            size_max: 2.0,
            min_clearance: 0.1,
            min_free_area: 20.0,
            wall_thickness: 0.2,
            eligible_fraction: 0.9,
            base_height_max: 0.5,
            max_attempts: 200,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.room_min > 0.0
            && self.room_max >= self.room_min
            && self.objects_max >= self.objects_min
            && self.size_min > 0.0
            && self.size_max >= self.size_min
            && self.size_max < self.room_min
            && self.min_clearance >= 0.0
            && self.wall_thickness > 0.0
            && (0.0..=1.0).contains(&self.eligible_fraction)
            && self.max_attempts > 0;
        if ok {
            Ok(())
        } else {
            Err(SceneError::Invalid(format!("invalid scene parameters: {self:?}")))
        }
    }
}

const CATEGORIES: [&str; 9] = [
    "chair", "drawers", "couch", "picture", "shelves", "table", "cabinet", "bed", "unlabeled",
];

/// Deterministic room generation for `seed`.
pub fn sample_scene(seed: u64, params: &SceneParams) -> Result<Scene, SceneError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(params.room_min..=params.room_max);
    let h = rng.gen_range(params.room_min..=params.room_max);
    let count = rng.gen_range(params.objects_min..=params.objects_max);
    let mut last_reason = String::new();
    for _ in 0..params.max_attempts {
        match place_objects(&mut rng, w, h, count, params) {
            Ok(objects) => {
                let scene = Scene {
                    version: SCENE_VERSION.to_string(),
                    seed,
                    bounds: Bounds { w, h },
                    walls: perimeter_walls(w, h, params.wall_thickness),
                    objects,
                };
                if scene.free_area() >= params.min_free_area {
                    return Ok(scene);
                }
                last_reason = format!("free area {:.2} below minimum", scene.free_area());
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(SceneError::GenerationFailed {
        attempts: params.max_attempts,
        reason: last_reason,
    })
}

fn place_objects(
    rng: &mut ChaCha8Rng,
    w: f64,
    h: f64,
    count: usize,
    params: &SceneParams,
) -> Result<Vec<SceneObject>, String> {
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    for id in 0..count {
        let mut placed = None;
        for _ in 0..params.max_attempts {
            let hx = rng.gen_range(params.size_min..=params.size_max) / 2.0;
            let hy = rng.gen_range(params.size_min..=params.size_max) / 2.0;
            let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let ex = (hx * yaw.cos()).abs() + (hy * yaw.sin()).abs();
            let ey = (hx * yaw.sin()).abs() + (hy * yaw.cos()).abs();
            if 2.0 * ex >= w || 2.0 * ey >= h {
                continue;
            }
            let cx = rng.gen_range(ex..w - ex);
            let cy = rng.gen_range(ey..h - ey);
            let candidate = OrientedBox { cx, cy, hx, hy, yaw };
            let inflated = OrientedBox {
                hx: hx + params.min_clearance / 2.0,
                hy: hy + params.min_clearance / 2.0,
                ..candidate
            };
            let clash = objects.iter().any(|o| {
                let other = OrientedBox {
                    hx: o.shape.hx + params.min_clearance / 2.0,
                    hy: o.shape.hy + params.min_clearance / 2.0,
                    ..o.shape
                };
                inflated.overlaps(&other)
            });
            if !clash {
                placed = Some(candidate);
                break;
            }
        }
        let shape = placed.ok_or_else(|| format!("could not place object {id}"))?;
        let eligible = rng.gen_bool(params.eligible_fraction);
        let category = if eligible {
            CATEGORIES[rng.gen_range(0..CATEGORIES.len())].to_string()
        } else {
            "column".to_string()
        };
        let base_height = if params.base_height_max > 0.0 {
            rng.gen_range(0.0..params.base_height_max)
        } else {
            0.0
        };
        objects.push(SceneObject {
            id: id as u32,
            shape,
            base_height,
            category,
            target_eligible: eligible,
        });
    }
    Ok(objects)
}

/// Signed clearance between a disc and the nearest obstacle or room boundary.
pub fn clearance(scene: &Scene, p: [f64; 2], radius: f64) -> f64 {
    let mut best = scene.bounds.interior_distance(p);
    for b in scene.boxes() {
        best = best.min(b.distance_to_point(p));
    }
    best - radius
}

/// True iff the disc overlaps any box or leaves the room; touching is free.
pub fn collision_check(scene: &Scene, pose: &Pose2, radius: f64) -> bool {
    let p = pose.position();
    if scene.bounds.interior_distance(p) < radius {
        return true;
    }
    scene.boxes().any(|b| b.distance_to_point(p) < radius)
}

/// Exact clearance of the disc swept along the straight segment `a`-`b`.
pub fn segment_clearance(scene: &Scene, a: [f64; 2], b: [f64; 2], radius: f64) -> f64 {
    let mut best = scene
        .bounds
        .interior_distance(a)
        .min(scene.bounds.interior_distance(b));
    for bx in scene.boxes() {
        best = best.min(bx.distance_to_segment(a, b));
    }
    best - radius
}

/// Sampled sweep: checks interpolated poses no more than `step` apart,
/// endpoints included.
pub fn sweep_collision_check(
    scene: &Scene,
    from: &Pose2,
    to: &Pose2,
    radius: f64,
    step: f64,
) -> bool {
    assert!(step > 0.0, "sweep step must be positive");
    let dist = from.distance_to(to);
    let n = ((dist / step).ceil() as usize).max(1);
    let dh = wrap_angle(to.heading - from.heading);
    (0..=n).any(|i| {
        let t = i as f64 / n as f64;
        let p = Pose2::new(
            from.x + t * (to.x - from.x),
            from.y + t * (to.y - from.y),
            from.heading + t * dh,
        );
        collision_check(scene, &p, radius)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub num_rays: usize,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    /// Robot-frame bearing of ray `k`.
    pub fn bearing(&self, k: usize) -> f64 {
        std::f64::consts::TAU * k as f64 / self.num_rays as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub num_rays: usize,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            num_rays: 360,
            max_range: 10.0,
        }
    }
}

/// Ray parameter of the first hit with a box, `None` if the ray misses.
pub fn ray_box_hit(b: &OrientedBox, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
    let o = b.to_local(origin);
    let (s, c) = b.yaw.sin_cos();
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1]];
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for axis in 0..2 {
        let half = if axis == 0 { b.hx } else { b.hy };
        if d[axis].abs() < 1e-300 {
            if o[axis].abs() > half {
                return None;
            }
        } else {
            let ta = (-half - o[axis]) / d[axis];
            let tb = (half - o[axis]) / d[axis];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if t0 > t1 || t1 < 0.0 {
        None
    } else {
        Some(t0.max(0.0))
    }
}

pub fn raycast_lidar(scene: &Scene, pose: &Pose2, num_rays: usize, max_range: f64) -> LidarScan {
    let origin = pose.position();
    let ranges = (0..num_rays)
        .map(|k| {
            let a = pose.heading + std::f64::consts::TAU * k as f64 / num_rays as f64;
            let dir = [a.cos(), a.sin()];
            scene
                .boxes()
                .filter_map(|b| ray_box_hit(b, origin, dir))
                .fold(max_range, f64::min)
        })
        .collect();
    LidarScan {
        num_rays,
        max_range,
        ranges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityConfig {
    pub fraction: f64,
    /// Footprint samples per box axis.
    pub samples_per_axis: usize,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            samples_per_axis: 5,
        }
    }
}

/// Footprint sample points on a uniform grid over the box.
pub fn footprint_samples(b: &OrientedBox, per_axis: usize) -> Vec<[f64; 2]> {
    let n = per_axis.max(1);
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = (i as f64 + 0.5) / n as f64 * 2.0 - 1.0;
            let v = (j as f64 + 0.5) / n as f64 * 2.0 - 1.0;
            pts.push(b.to_world([u * b.hx, v * b.hy]));
        }
    }
    pts
}

/// Number of footprint samples inside the horizontal field of view with an
/// unobstructed line of sight, and the total sample count.
pub fn visible_sample_count(
    camera_pose: &Pose2,
    camera: &CameraModel,
    target: &SceneObject,
    scene: &Scene,
    cfg: &VisibilityConfig,
) -> (usize, usize) {
    let half_fov = camera.horizontal_fov() / 2.0;
    let eye = camera_pose.position();
    let samples = footprint_samples(&target.shape, cfg.samples_per_axis);
    let occluders: Vec<&OrientedBox> = scene
        .walls
        .iter()
        .chain(scene.objects.iter().filter(|o| o.id != target.id).map(|o| &o.shape))
        .collect();
    let seen = samples
        .iter()
        .filter(|p| {
            let bearing = (p[1] - eye[1]).atan2(p[0] - eye[0]);
            if wrap_angle(bearing - camera_pose.heading).abs() > half_fov {
                return false;
            }
            occluders.iter().all(|b| b.distance_to_segment(eye, **p) > 0.0)
        })
        .count();
    (seen, samples.len())
}

pub fn visible_from(
    camera_pose: &Pose2,
    camera: &CameraModel,
    target: &SceneObject,
    scene: &Scene,
    cfg: &VisibilityConfig,
) -> bool {
    let (seen, total) = visible_sample_count(camera_pose, camera, target, scene, cfg);
    seen > 0 && seen as f64 >= cfg.fraction * total as f64 - 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn object(id: u32, cx: f64, cy: f64, hx: f64, hy: f64, yaw: f64) -> SceneObject {
        SceneObject {
            id,
            shape: OrientedBox { cx, cy, hx, hy, yaw },
            base_height: 0.0,
            category: "table".into(),
            target_eligible: true,
        }
    }

    #[test]
    fn walls_only_scene() {
        let params = SceneParams {
            objects_min: 0,
            objects_max: 0,
            ..Default::default()
        };
        let s = sample_scene(1, &params).unwrap();
        assert!(s.objects.is_empty());
        assert_eq!(s.walls.len(), 4);
        assert_eq!(s.free_area(), s.bounds.area());
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SceneParams::default();
        let a = sample_scene(1, &p).unwrap();
        let b = sample_scene(1, &p).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a, sample_scene(2, &p).unwrap());
    }

    #[test]
    fn impossible_params_fail() {
        let p = SceneParams {
            room_min: 6.0,
            room_max: 6.0,
            objects_min: 15,
            objects_max: 15,
            size_min: 1.9,
            size_max: 2.0,
            max_attempts: 5,
            ..Default::default()
        };
        assert!(matches!(sample_scene(3, &p), Err(SceneError::GenerationFailed { .. })));
    }

    #[test]
    fn json_roundtrip_and_schema_errors() {
        let s = sample_scene(7, &SceneParams::default()).unwrap();
        let back = Scene::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let bad = s.to_json().replace("\"bounds\"", "\"bnds\"");
        assert!(matches!(Scene::from_json(&bad), Err(SceneError::SchemaMismatch(_))));
        let mut dup = s.clone();
        dup.objects[1].id = dup.objects[0].id;
        assert!(Scene::from_json(&dup.to_json()).is_err());
    }

    #[test]
    fn collision_boundary_convention() {
        let scene = Scene::empty_room(10.0, 10.0, 0).with_objects(vec![object(0, 5.0, 5.0, 0.5, 0.5, 0.0)]);
        let empty = Scene::empty_room(10.0, 10.0, 0);
        assert!(!collision_check(&empty, &Pose2::new(5.0, 5.0, 0.0), 0.3));
        // Tangent to the +x face.
        assert!(!collision_check(&scene, &Pose2::new(5.75, 5.0, 0.0), 0.25));
        assert!(collision_check(&scene, &Pose2::new(5.75 - 1e-6, 5.0, 0.0), 0.25));
        // Touching the room boundary is free, crossing it is not.
        assert!(!collision_check(&empty, &Pose2::new(0.3, 5.0, 0.0), 0.3));
        assert!(collision_check(&empty, &Pose2::new(0.3 - 1e-9, 5.0, 0.0), 0.3));
    }

    #[test]
    fn sweep_examples() {
        let scene = Scene::empty_room(10.0, 10.0, 0).with_objects(vec![object(0, 5.0, 5.0, 0.05, 2.0, 0.0)]);
        let p = Pose2::new(5.8, 5.0, 0.0);
        assert_eq!(
            sweep_collision_check(&scene, &p, &p, 0.3, 0.01),
            collision_check(&scene, &p, 0.3)
        );
        let a = Pose2::new(4.0, 5.0, 0.0);
        let b = Pose2::new(6.0, 5.0, 0.0);
        assert!(!collision_check(&scene, &a, 0.3) && !collision_check(&scene, &b, 0.3));
        assert!(sweep_collision_check(&scene, &a, &b, 0.3, 0.05));
        assert!(segment_clearance(&scene, a.position(), b.position(), 0.3) < 0.0);
    }

    #[test]
    fn lidar_in_empty_room() {
        let scene = Scene::empty_room(10.0, 10.0, 0);
        let scan = raycast_lidar(&scene, &Pose2::new(5.0, 5.0, 0.0), 360, 10.0);
        assert_eq!(scan.ranges.len(), 360);
        assert!((scan.ranges[0] - 5.0).abs() < 1e-12);
        assert!((scan.ranges[45] - 50f64.sqrt()).abs() < 1e-9);
        assert!((scan.ranges[90] - 5.0).abs() < 1e-9);
        assert!(scan.ranges.iter().all(|&r| r > 0.0 && r <= 10.0));
        let short = raycast_lidar(&scene, &Pose2::new(5.0, 5.0, 0.0), 8, 3.0);
        assert!(short.ranges.iter().all(|&r| r == 3.0));
    }

    #[test]
    fn lidar_occlusion_by_wall() {
        let walls_only = Scene::empty_room(10.0, 10.0, 0);
        let hidden = walls_only
            .clone()
            .with_objects(vec![object(0, 11.0, 5.0, 0.5, 0.5, 0.3)]);
        let pose = Pose2::new(3.0, 4.0, 0.7);
        assert_eq!(
            raycast_lidar(&walls_only, &pose, 360, 10.0),
            raycast_lidar(&hidden, &pose, 360, 10.0)
        );
    }

    #[test]
    fn lidar_hits_rotated_box() {
        let scene = Scene::empty_room(10.0, 10.0, 0)
            .with_objects(vec![object(0, 7.0, 5.0, 0.5, 0.5, FRAC_PI_4)]);
        let scan = raycast_lidar(&scene, &Pose2::new(5.0, 5.0, 0.0), 4, 10.0);
        assert!((scan.ranges[0] - (2.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn visibility_examples() {
        let cam = CameraModel::default();
        let cfg = VisibilityConfig::default();
        let target = object(0, 7.0, 5.0, 0.5, 0.5, 0.0);
        let scene = Scene::empty_room(10.0, 10.0, 0).with_objects(vec![target.clone()]);
        assert!(visible_from(&Pose2::new(3.0, 5.0, 0.0), &cam, &target, &scene, &cfg));
        assert!(!visible_from(&Pose2::new(3.0, 5.0, PI), &cam, &target, &scene, &cfg));
    }

    #[test]
    fn visibility_flips_at_fraction() {
        let cam = CameraModel::default();
        let target = object(0, 7.0, 5.0, 0.5, 1.0, 0.0);
        // Thin wall segment covering the lower part of the target's footprint.
        let blocker = object(1, 5.0, 4.6, 0.05, 0.6, 0.0);
        let scene = Scene::empty_room(10.0, 10.0, 0).with_objects(vec![target.clone(), blocker]);
        let eye = Pose2::new(3.0, 5.0, 0.0);
        let base = VisibilityConfig::default();
        // Count unobstructed rays independently with a fine sampled segment test.
        let samples = footprint_samples(&target.shape, base.samples_per_axis);
        let blocked = |p: &[f64; 2]| {
            (0..=2000).any(|i| {
                let t = i as f64 / 2000.0;
                let q = [eye.x + t * (p[0] - eye.x), eye.y + t * (p[1] - eye.y)];
                scene.objects[1].shape.distance_to_point(q) == 0.0
            })
        };
        let open = samples.iter().filter(|p| !blocked(p)).count();
        assert!(open > 0 && open < samples.len());
        let frac = open as f64 / samples.len() as f64;
        let at = VisibilityConfig { fraction: frac, ..base };
        let above = VisibilityConfig {
            fraction: frac + 0.5 / samples.len() as f64,
            ..base
        };
        assert_eq!(visible_sample_count(&eye, &cam, &target, &scene, &base), (open, samples.len()));
        assert!(visible_from(&eye, &cam, &target, &scene, &at));
        assert!(!visible_from(&eye, &cam, &target, &scene, &above));
    }

    #[test]
    fn lowest_point_is_nearest_corner() {
        let o = SceneObject {
            base_height: 0.2,
            ..object(0, 2.0, 0.0, 0.5, 0.5, 0.0)
        };
        assert_eq!(o.lowest_point([0.0, 0.0]), [1.5, 0.5, 0.2]);
    }
}
