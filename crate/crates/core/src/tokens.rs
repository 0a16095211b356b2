//! Sensor tokenization: LiDAR directional grouping, depth backprojection and
//! sinusoidal position features. Robot frame: x forward, y left, z up.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geometry::CameraModel;
use crate::scene::LidarScan;

pub const LIDAR_POINTS: usize = 256;
pub const LIDAR_GROUPS: usize = 32;
pub const POINTS_PER_GROUP: usize = LIDAR_POINTS / LIDAR_GROUPS;
pub const DEPTH_GRID: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarTokens {
    /// `LIDAR_GROUPS` groups of `POINTS_PER_GROUP` robot-frame points, by bearing.
    pub groups: Vec<Vec<[f64; 2]>>,
}

/// Range at an arbitrary bearing, linearly interpolated between adjacent rays.
fn range_at(scan: &LidarScan, bearing: f64) -> f64 {
    let n = scan.num_rays;
    let pos = bearing / TAU * n as f64;
    let i0 = pos.floor() as usize % n;
    let f = pos - pos.floor();
    let i1 = (i0 + 1) % n;
    if f == 0.0 {
        scan.ranges[i0]
    } else {
        (1.0 - f) * scan.ranges[i0] + f * scan.ranges[i1]
    }
}

pub fn lidar_tokens(scan: &LidarScan) -> LidarTokens {
    let groups = (0..LIDAR_GROUPS)
        .map(|g| {
            (0..POINTS_PER_GROUP)
                .map(|k| {
                    let j = g * POINTS_PER_GROUP + k;
                    let b = TAU * j as f64 / LIDAR_POINTS as f64;
                    let r = range_at(scan, b);
                    [r * b.cos(), r * b.sin()]
                })
                .collect()
        })
        .collect();
    LidarTokens { groups }
}

/// Camera mounting on the robot: height of the optical center and downward tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub height: f64,
    pub tilt: f64,
}

impl CameraExtrinsics {
    /// Columns are the optical x (right), y (down) and z (forward) axes in the robot frame.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let (s, c) = self.tilt.sin_cos();
        let right = [0.0, -1.0, 0.0];
        let down = [-s, 0.0, -c];
        let forward = [c, 0.0, -s];
        [
            [right[0], down[0], forward[0]],
            [right[1], down[1], forward[1]],
            [right[2], down[2], forward[2]],
        ]
    }

    pub fn translation(&self) -> [f64; 3] {
        [0.0, 0.0, self.height]
    }
}

/// Pinhole intrinsics rescaled to the `DEPTH_GRID` resolution.
pub fn grid_intrinsics(camera: &CameraModel) -> [f64; 4] {
    let sx = DEPTH_GRID as f64 / camera.image_width_px as f64;
    let sy = DEPTH_GRID as f64 / camera.image_height_px as f64;
    [camera.fx * sx, camera.fy * sy, camera.cx_px * sx, camera.cy_px * sy]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthGrid {
    /// Row-major depth values, row 0 at the image top.
    pub depth: Vec<f64>,
    pub points: Vec<[f64; 3]>,
}

pub fn backproject_depth(
    depth: &[f64; DEPTH_GRID * DEPTH_GRID],
    camera: &CameraModel,
    extrinsics: &CameraExtrinsics,
) -> DepthGrid {
    let [fx, fy, cx, cy] = grid_intrinsics(camera);
    let rot = extrinsics.rotation();
    let t = extrinsics.translation();
    let points = (0..DEPTH_GRID * DEPTH_GRID)
        .map(|idx| {
            let (row, col) = (idx / DEPTH_GRID, idx % DEPTH_GRID);
            let d = depth[idx];
            let u = col as f64 + 0.5;
            let v = row as f64 + 0.5;
            let o = [(u - cx) / fx * d, (v - cy) / fy * d, d];
            let mut p = t;
            for (i, pi) in p.iter_mut().enumerate() {
                *pi += rot[i][0] * o[0] + rot[i][1] * o[1] + rot[i][2] * o[2];
            }
            p
        })
        .collect();
    DepthGrid {
        depth: depth.to_vec(),
        points,
    }
}

/// Pixel coordinates `(u, v)` of a robot-frame point at grid resolution.
pub fn project_to_grid(point: [f64; 3], camera: &CameraModel, extrinsics: &CameraExtrinsics) -> Option<[f64; 2]> {
    let [fx, fy, cx, cy] = grid_intrinsics(camera);
    let rot = extrinsics.rotation();
    let t = extrinsics.translation();
    let d = [point[0] - t[0], point[1] - t[1], point[2] - t[2]];
    // Transpose maps robot offsets into the optical frame.
    let o: Vec<f64> = (0..3)
        .map(|j| rot[0][j] * d[0] + rot[1][j] * d[1] + rot[2][j] * d[2])
        .collect();
    if o[2] <= 0.0 {
        return None;
    }
    Some([fx * o[0] / o[2] + cx, fy * o[1] / o[2] + cy])
}

/// Interleaved sin/cos features; pair `j` has frequency `base^(-2j/dims)`.
pub fn sinusoidal_embed(value: f64, dims: usize, base: f64) -> Vec<f64> {
    assert!(dims >= 2 && dims.is_multiple_of(2), "dims must be even and at least 2");
    let mut out = Vec::with_capacity(dims);
    for j in 0..dims / 2 {
        let freq = base.powf(-2.0 * j as f64 / dims as f64);
        let (s, c) = (value * freq).sin_cos();
        out.push(s);
        out.push(c);
    }
    out
}

/// Concatenated embeddings of a point's three coordinates.
pub fn point_features(p: [f64; 3], dims: usize, base: f64) -> Vec<f64> {
    p.iter().flat_map(|v| sinusoidal_embed(*v, dims, base)).collect()
}
