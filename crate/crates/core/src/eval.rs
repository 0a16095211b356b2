//! Closed-loop benchmark runner and metrics reports.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{run_episode, EpisodeResult, ExecutorConfig, Outcome, Policy};
use crate::dataset::Task;
use crate::kinematics::Kinematics;
use crate::scene::Scene;

pub const REPORT_VERSION: &str = "report-v1";
pub const CSV_HEADER: &str = "schema,distance_bucket,ffr,visible,count,dist_median,dist_p90,dist_max,angle_median,angle_p90,angle_max";

/// Upper edges of the initial-distance buckets; the last bucket is open.
pub const BUCKET_EDGES: [f64; 3] = [2.0, 4.0, 6.0];
pub const BUCKET_LABELS: [&str; 4] = ["0-2", "2-4", "4-6", "6+"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report parse error: {0}")]
    Parse(String),
    #[error("no tasks to evaluate")]
    Empty,
    #[error("scene {0} missing for task")]
    MissingScene(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessTolerance {
    pub distance: f64,
    pub angle_deg: f64,
}

impl Default for SuccessTolerance {
    fn default() -> Self {
        Self {
            distance: 0.1,
            angle_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub distance_bucket: String,
    pub ffr: bool,
    pub visible: bool,
    pub count: usize,
    pub distance_error: Summary,
    pub angle_error: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub version: String,
    pub n_episodes: usize,
    pub median_distance_error: Option<f64>,
    pub median_angle_error: Option<f64>,
    pub collision_rate: f64,
    pub success_tolerance: SuccessTolerance,
    pub success_rate: f64,
    pub reached: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub no_path: usize,
    /// Medians with collision episodes removed.
    pub success_only_median_distance_error: Option<f64>,
    pub success_only_median_angle_error: Option<f64>,
    pub buckets: Vec<Bucket>,
}

/// Linear-interpolated quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

fn summarize(values: &[f64]) -> Summary {
    Summary {
        median: median(values),
        p90: quantile(values, 0.9),
        max: values.iter().copied().reduce(f64::max),
    }
}

/// Bucket index for a start-to-target distance; edges belong to the lower bucket.
pub fn bucket_index(distance: f64) -> usize {
    BUCKET_EDGES.iter().position(|&e| distance <= e).unwrap_or(BUCKET_EDGES.len())
}

/// Per-episode inputs to aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub distance_error: f64,
    pub angle_error: f64,
    pub initial_distance: f64,
    pub ffr: bool,
    pub visible: bool,
}

pub fn aggregate(episodes: &[EpisodeSummary], tol: &SuccessTolerance) -> MetricsReport {
    let n = episodes.len();
    let dist: Vec<f64> = episodes.iter().map(|e| e.distance_error).collect();
    let ang: Vec<f64> = episodes.iter().map(|e| e.angle_error).collect();
    let count = |o: Outcome| episodes.iter().filter(|e| e.outcome == o).count();
    let collisions = count(Outcome::Collision);
    let successes = episodes
        .iter()
        .filter(|e| {
            e.outcome != Outcome::Collision && e.distance_error <= tol.distance && e.angle_error <= tol.angle_deg
        })
        .count();
    let clean: Vec<&EpisodeSummary> = episodes.iter().filter(|e| e.outcome != Outcome::Collision).collect();
    let clean_d: Vec<f64> = clean.iter().map(|e| e.distance_error).collect();
    let clean_a: Vec<f64> = clean.iter().map(|e| e.angle_error).collect();
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };

    let mut buckets = Vec::with_capacity(16);
    for (bi, label) in BUCKET_LABELS.iter().enumerate() {
        for ffr in [true, false] {
            for visible in [true, false] {
                let members: Vec<&EpisodeSummary> = episodes
                    .iter()
                    .filter(|e| bucket_index(e.initial_distance) == bi && e.ffr == ffr && e.visible == visible)
                    .collect();
                let d: Vec<f64> = members.iter().map(|e| e.distance_error).collect();
                let a: Vec<f64> = members.iter().map(|e| e.angle_error).collect();
                buckets.push(Bucket {
                    distance_bucket: label.to_string(),
                    ffr,
                    visible,
                    count: members.len(),
                    distance_error: summarize(&d),
                    angle_error: summarize(&a),
                });
            }
        }
    }
    MetricsReport {
        version: REPORT_VERSION.to_string(),
        n_episodes: n,
        median_distance_error: median(&dist),
        median_angle_error: median(&ang),
        collision_rate: rate(collisions),
        success_tolerance: *tol,
        success_rate: rate(successes),
        reached: count(Outcome::Reached),
        collisions,
        timeouts: count(Outcome::Timeout),
        no_path: count(Outcome::NoPath),
        success_only_median_distance_error: median(&clean_d),
        success_only_median_angle_error: median(&clean_a),
        buckets,
    }
}

/// Runs every task and aggregates the results. Episodes whose setup fails
/// are recorded as `no_path` at the start pose.
pub fn evaluate(
    tasks: &[(Scene, Task)],
    policy: &dyn Policy,
    cfg: &ExecutorConfig,
    tol: &SuccessTolerance,
) -> Result<(MetricsReport, Vec<EpisodeResult>), EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::Empty);
    }
    let results: Vec<(EpisodeSummary, EpisodeResult)> = tasks
        .par_iter()
        .map(|(scene, task)| {
            let result = run_episode(scene, task, policy, cfg, Kinematics::Differential).unwrap_or_else(|e| {
                log::warn!("task {}: episode failed: {e}", task.seed);
                let (distance_error, angle_error) = crate::geometry::pose_error(&task.start, &task.goal_pose);
                EpisodeResult {
                    task_seed: task.seed,
                    outcome: Outcome::NoPath,
                    final_pose: task.start,
                    distance_error,
                    angle_error,
                    steps: 0,
                    policy_queries: 0,
                    min_clearance: f64::NAN,
                    trace: Vec::new(),
                }
            });
            let summary = EpisodeSummary {
                outcome: result.outcome,
                distance_error: result.distance_error,
                angle_error: result.angle_error,
                initial_distance: task.initial_distance(scene).unwrap_or(f64::INFINITY),
                ffr: task.ffr,
                visible: task.initially_visible,
            };
            (summary, result)
        })
        .collect();
    let summaries: Vec<EpisodeSummary> = results.iter().map(|r| r.0).collect();
    Ok((aggregate(&summaries, tol), results.into_iter().map(|r| r.1).collect()))
}

/// Rounds to 6 significant digits.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn sig6_opt(x: Option<f64>) -> Option<f64> {
    x.map(sig6)
}

fn round_summary(s: &Summary) -> Summary {
    Summary {
        median: sig6_opt(s.median),
        p90: sig6_opt(s.p90),
        max: sig6_opt(s.max),
    }
}

impl MetricsReport {
    /// Copy with every real value rounded to 6 significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            median_distance_error: sig6_opt(self.median_distance_error),
            median_angle_error: sig6_opt(self.median_angle_error),
            collision_rate: sig6(self.collision_rate),
            success_tolerance: SuccessTolerance {
                distance: sig6(self.success_tolerance.distance),
                angle_deg: sig6(self.success_tolerance.angle_deg),
            },
            success_rate: sig6(self.success_rate),
            success_only_median_distance_error: sig6_opt(self.success_only_median_distance_error),
            success_only_median_angle_error: sig6_opt(self.success_only_median_angle_error),
            buckets: self
                .buckets
                .iter()
                .map(|b| Bucket {
                    distance_error: round_summary(&b.distance_error),
                    angle_error: round_summary(&b.angle_error),
                    ..b.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn report_to_json(report: &MetricsReport) -> String {
    serde_json::to_string_pretty(&report.rounded()).expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<MetricsReport, EvalError> {
    let r: MetricsReport = serde_json::from_str(text).map_err(|e| EvalError::Parse(e.to_string()))?;
    if r.version != REPORT_VERSION {
        return Err(EvalError::Parse(format!("version {:?}", r.version)));
    }
    Ok(r)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| sig6(v).to_string()).unwrap_or_default()
}

/// One row per bucket; empty buckets have count 0 and blank statistics.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for b in &report.buckets {
        out.push_str(&format!(
            "{REPORT_VERSION},{},{},{},{},{},{},{},{},{},{}\n",
            b.distance_bucket,
            b.ffr,
            b.visible,
            b.count,
            cell(b.distance_error.median),
            cell(b.distance_error.p90),
            cell(b.distance_error.max),
            cell(b.angle_error.median),
            cell(b.angle_error.p90),
            cell(b.angle_error.max),
        ));
    }
    out
}

/// Parses the bucket rows of a CSV report.
pub fn buckets_from_csv(text: &str) -> Result<Vec<Bucket>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(EvalError::Parse("unexpected CSV header".into()));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>, EvalError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| EvalError::Parse(format!("{s:?}: {e}")))
        }
    };
    let parse_bool = |s: &str| s.parse::<bool>().map_err(|e| EvalError::Parse(format!("{s:?}: {e}")));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 11 || f[0] != REPORT_VERSION {
                return Err(EvalError::Parse(format!("bad row {l:?}")));
            }
            Ok(Bucket {
                distance_bucket: f[1].to_string(),
                ffr: parse_bool(f[2])?,
                visible: parse_bool(f[3])?,
                count: f[4].parse().map_err(|e| EvalError::Parse(format!("{:?}: {e}", f[4])))?,
                distance_error: Summary {
                    median: parse_opt(f[5])?,
                    p90: parse_opt(f[6])?,
                    max: parse_opt(f[7])?,
                },
                angle_error: Summary {
                    median: parse_opt(f[8])?,
                    p90: parse_opt(f[9])?,
                    max: parse_opt(f[10])?,
                },
            })
        })
        .collect()
}

pub fn report_export(report: &MetricsReport, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    let text = match format {
        ReportFormat::Json => report_to_json(report),
        ReportFormat::Csv => report_to_csv(report),
    };
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
