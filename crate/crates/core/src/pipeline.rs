//! Batch commands behind the command-line tool.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{derive_seed, ConfigError, PolicyKind, RunConfig};
use crate::controller::{CodecRoundtripPolicy, EpisodeResult, OraclePolicy, Policy};
use crate::dataset::{generate_episode, sample_task, write_dataset, DataError, EpisodeRecord, Manifest, Task};
use crate::eval::{
    evaluate, report_export, report_from_json, report_to_csv, EvalError, MetricsReport, ReportFormat,
};
use crate::scene::{sample_scene, Scene, SceneError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {message}")]
    BadInput { path: PathBuf, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn scene_file_name(index: usize) -> String {
    format!("scene_{index:04}.json")
}

/// Writes `count` scenes with seeds derived from the master seed.
pub fn cmd_gen_scenes(cfg: &RunConfig, count: usize, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    ensure_dir(out_dir)?;
    let scenes: Vec<Result<Scene, SceneError>> = with_pool(cfg.run.workers, || {
        (0..count)
            .into_par_iter()
            .map(|i| sample_scene(derive_seed(cfg.run.master_seed, "scene", i as u64), &cfg.scene))
            .collect()
    })?;
    let mut paths = Vec::with_capacity(count);
    for (i, scene) in scenes.into_iter().enumerate() {
        let scene = scene?;
        let path = out_dir.join(scene_file_name(i));
        std::fs::write(&path, scene.to_json()).map_err(io_err(&path))?;
        log::info!("scene index={i} seed={} objects={} path={}", scene.seed, scene.objects.len(), path.display());
        paths.push(path);
    }
    Ok(paths)
}

/// Loads every `scene_*.json` in `dir`, sorted by file name.
pub fn load_scenes(dir: &Path) -> Result<Vec<Scene>, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("scene_") && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            Scene::from_json(&text).map_err(|e| PipelineError::BadInput {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenDataSummary {
    pub manifest: Manifest,
    pub attempted: usize,
    pub failed: usize,
}

/// Samples tasks and demonstrations for every scene. Failed items are
/// logged and skipped.
pub fn cmd_gen_data(
    cfg: &RunConfig,
    scenes_dir: &Path,
    episodes_per_scene: usize,
    out_path: &Path,
) -> Result<GenDataSummary, PipelineError> {
    let scenes = load_scenes(scenes_dir)?;
    ensure_parent(out_path)?;
    let expert = cfg.expert();
    let items: Vec<(usize, usize)> = (0..scenes.len())
        .flat_map(|s| (0..episodes_per_scene).map(move |k| (s, k)))
        .collect();
    let results: Vec<Result<EpisodeRecord, DataError>> = with_pool(cfg.run.workers, || {
        items
            .par_iter()
            .map(|&(s, k)| {
                let scene = &scenes[s];
                let seed = derive_seed(cfg.run.master_seed, &format!("data/{}", scene.seed), k as u64);
                let task = sample_task(scene, seed, &cfg.task, &expert.camera)?;
                generate_episode(scene, &task, &expert)
            })
            .collect()
    })?;
    let mut records = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (&(s, k), r) in items.iter().zip(results) {
        match r {
            Ok(rec) => {
                log::info!(
                    "episode scene_seed={} task_seed={} keyframes={} cost={:.4}",
                    rec.task.scene_seed,
                    rec.task.seed,
                    rec.keyframes.len(),
                    rec.planner_cost
                );
                records.push(rec);
            }
            Err(e) => {
                failed += 1;
                let level = if matches!(e, DataError::NoEligibleTarget) { log::Level::Warn } else { log::Level::Info };
                log::log!(level, "episode scene_seed={} index={k} skipped: {e}", scenes[s].seed);
            }
        }
    }
    let manifest = write_dataset(&records, out_path, cfg.run.master_seed, scenes.len(), &cfg.hash())?;
    Ok(GenDataSummary {
        manifest,
        attempted: items.len(),
        failed,
    })
}

/// Samples `n_tasks` evaluation tasks, cycling through the scenes. A task
/// that cannot be sampled is retried with the next derived seed.
pub fn sample_eval_tasks(cfg: &RunConfig, scenes: &[Scene], n_tasks: usize) -> Result<Vec<(Scene, Task)>, PipelineError> {
    if scenes.is_empty() {
        return Err(PipelineError::Eval(EvalError::Empty));
    }
    let camera = cfg.executor.camera;
    let tasks: Vec<Result<(Scene, Task), DataError>> = (0..n_tasks)
        .into_par_iter()
        .map(|i| {
            let scene = &scenes[i % scenes.len()];
            let mut last = DataError::SamplingExhausted(0);
            for retry in 0..=cfg.eval.max_task_retries {
                let seed = derive_seed(cfg.run.master_seed, &format!("eval/{retry}"), i as u64);
                match sample_task(scene, seed, &cfg.task, &camera) {
                    Ok(t) => return Ok((scene.clone(), t)),
                    Err(e) => last = e,
                }
            }
            Err(last)
        })
        .collect();
    Ok(tasks.into_iter().collect::<Result<_, _>>()?)
}

pub fn make_policy(cfg: &RunConfig, kind: PolicyKind, residuals: bool) -> Box<dyn Policy> {
    let oracle = OraclePolicy { expert: cfg.expert() };
    match kind {
        PolicyKind::Oracle => Box::new(oracle),
        PolicyKind::CodecRoundtrip => Box::new(CodecRoundtripPolicy { oracle, residuals }),
    }
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TRACES: &str = "traces.jsonl";

/// Runs the benchmark and writes `report.json`, `report.csv` and
/// `traces.jsonl` into `out_dir`.
pub fn cmd_eval(
    cfg: &RunConfig,
    scenes_dir: &Path,
    n_tasks: usize,
    kind: PolicyKind,
    residuals: bool,
    out_dir: &Path,
) -> Result<(MetricsReport, Vec<EpisodeResult>), PipelineError> {
    let scenes = load_scenes(scenes_dir)?;
    ensure_dir(out_dir)?;
    let policy = make_policy(cfg, kind, residuals);
    let (report, results) = with_pool(cfg.run.workers, || -> Result<_, PipelineError> {
        let tasks = sample_eval_tasks(cfg, &scenes, n_tasks)?;
        Ok(evaluate(&tasks, policy.as_ref(), &cfg.executor, &cfg.eval.tolerance)?)
    })??;
    for r in &results {
        log::info!(
            "eval task_seed={} outcome={:?} distance_error={:.5} angle_error={:.4} steps={} queries={}",
            r.task_seed,
            r.outcome,
            r.distance_error,
            r.angle_error,
            r.steps,
            r.policy_queries
        );
    }
    report_export(&report, ReportFormat::Json, &out_dir.join(REPORT_JSON))?;
    report_export(&report, ReportFormat::Csv, &out_dir.join(REPORT_CSV))?;
    let tpath = out_dir.join(TRACES);
    let mut w = BufWriter::new(File::create(&tpath).map_err(io_err(&tpath))?);
    for r in &results {
        writeln!(w, "{}", serde_json::to_string(r).expect("result serializes")).map_err(io_err(&tpath))?;
    }
    w.flush().map_err(io_err(&tpath))?;
    Ok((report, results))
}

/// Reads a JSON report and renders a plain-text summary; optionally writes
/// the bucket table as CSV.
pub fn cmd_report(report_path: &Path, csv_out: Option<&Path>) -> Result<String, PipelineError> {
    let text = std::fs::read_to_string(report_path).map_err(io_err(report_path))?;
    let report = report_from_json(&text).map_err(|e| PipelineError::BadInput {
        path: report_path.to_path_buf(),
        message: e.to_string(),
    })?;
    if let Some(p) = csv_out {
        ensure_parent(p)?;
        std::fs::write(p, report_to_csv(&report)).map_err(io_err(p))?;
    }
    Ok(render_report(&report))
}

fn fmt_opt(x: Option<f64>, scale: f64, unit: &str) -> String {
    x.map(|v| format!("{:.3}{unit}", v * scale)).unwrap_or_else(|| "-".into())
}

pub fn render_report(r: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("episodes: {}\n", r.n_episodes));
    out.push_str(&format!(
        "median error: {} / {}\n",
        fmt_opt(r.median_distance_error, 100.0, " cm"),
        fmt_opt(r.median_angle_error, 1.0, " deg")
    ));
    out.push_str(&format!(
        "median error without collisions: {} / {}\n",
        fmt_opt(r.success_only_median_distance_error, 100.0, " cm"),
        fmt_opt(r.success_only_median_angle_error, 1.0, " deg")
    ));
    out.push_str(&format!(
        "success rate ({} m, {} deg): {:.1}%\ncollision rate: {:.1}%\n",
        r.success_tolerance.distance,
        r.success_tolerance.angle_deg,
        100.0 * r.success_rate,
        100.0 * r.collision_rate
    ));
    out.push_str(&format!(
        "outcomes: reached {} collision {} timeout {} no_path {}\n",
        r.reached, r.collisions, r.timeouts, r.no_path
    ));
    out.push_str(&format!(
        "{:<8}{:<6}{:<9}{:>6}{:>14}{:>14}{:>14}\n",
        "dist", "ffr", "visible", "n", "median cm", "p90 cm", "median deg"
    ));
    for b in r.buckets.iter().filter(|b| b.count > 0) {
        out.push_str(&format!(
            "{:<8}{:<6}{:<9}{:>6}{:>14}{:>14}{:>14}\n",
            b.distance_bucket,
            b.ffr,
            b.visible,
            b.count,
            fmt_opt(b.distance_error.median, 100.0, ""),
            fmt_opt(b.distance_error.p90, 100.0, ""),
            fmt_opt(b.angle_error.median, 1.0, ""),
        ));
    }
    out
}
