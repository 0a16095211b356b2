//! Run configuration: one TOML document plus `AMR_<SECTION>_<FIELD>` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controller::ExecutorConfig;
use crate::dataset::{ExpertConfig, TaskParams};
use crate::eval::SuccessTolerance;
use crate::planner::{PlannerConfig, TimingConfig};
use crate::scene::SceneParams;

pub const ENV_PREFIX: &str = "AMR_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment override {var}: {message}")]
    Override { var: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub master_seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub scene_count: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            master_seed: 0,
            workers: 0,
            scene_count: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertSection {
    pub plan_margin: f64,
}

impl Default for ExpertSection {
    fn default() -> Self {
        Self { plan_margin: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Oracle,
    CodecRoundtrip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_tasks: usize,
    pub policy: PolicyKind,
    /// Only used by the codec round-trip policy.
    pub residuals: bool,
    pub tolerance: SuccessTolerance,
    /// Retries with fresh seeds when a task cannot be sampled.
    pub max_task_retries: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_tasks: 50,
            policy: PolicyKind::Oracle,
            residuals: true,
            tolerance: SuccessTolerance::default(),
            max_task_retries: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub episodes_per_scene: usize,
    pub scenes_dir: PathBuf,
    pub out: PathBuf,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            episodes_per_scene: 10,
            scenes_dir: PathBuf::from("scenes"),
            out: PathBuf::from("dataset.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub scene: SceneParams,
    pub task: TaskParams,
    pub planner: PlannerConfig,
    pub timing: TimingConfig,
    pub executor: ExecutorConfig,
    pub expert: ExpertSection,
    pub eval: EvalSection,
    pub dataset: DatasetSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads `path` (defaults when `None`), applies process environment
    /// overrides and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml_str(&text, p)?
            }
            None => Self::default(),
        };
        let cfg = base.with_overrides(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies every `AMR_<SECTION>_<FIELD>` pair; other variables are ignored.
    pub fn with_overrides<I>(&self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        if vars.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for (var, raw) in &vars {
            let key = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            let slot = lookup(&mut doc, &key).ok_or_else(|| ConfigError::Override {
                var: var.clone(),
                message: "no such field".into(),
            })?;
            *slot = parse_scalar(slot, raw).map_err(|message| ConfigError::Override {
                var: var.clone(),
                message,
            })?;
        }
        serde_json::from_value(doc).map_err(|e| ConfigError::Override {
            var: vars.iter().map(|v| v.0.as_str()).collect::<Vec<_>>().join(","),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| ConfigError::Invalid(m);
        self.scene.validate().map_err(|e| inv(e.to_string()))?;
        self.planner.validate().map_err(|e| inv(e.to_string()))?;
        self.executor.validate().map_err(|e| inv(e.to_string()))?;
        if self.timing.horizon != self.executor.horizon_n || self.timing.dt != self.executor.dt {
            return Err(inv(format!(
                "timing (horizon {}, dt {}) disagrees with executor (horizon_n {}, dt {})",
                self.timing.horizon, self.timing.dt, self.executor.horizon_n, self.executor.dt
            )));
        }
        let t = &self.task;
        if !(0.1..=0.5).contains(&t.radius_min) || !(t.radius_min..=0.5).contains(&t.radius_max) {
            return Err(inv(format!("robot radius range [{}, {}] outside [0.1, 0.5]", t.radius_min, t.radius_max)));
        }
        if !(0.0..=1.0).contains(&t.d_min) || !(t.d_min..=1.0).contains(&t.d_max) {
            return Err(inv(format!("approach distance range [{}, {}] outside [0, 1]", t.d_min, t.d_max)));
        }
        if !(0.0..=1.0).contains(&t.p_ffr) {
            return Err(inv(format!("p_ffr {} outside [0, 1]", t.p_ffr)));
        }
        if self.expert.plan_margin < 0.0 {
            return Err(inv("plan_margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn expert(&self) -> ExpertConfig {
        ExpertConfig {
            planner: self.planner,
            timing: self.timing,
            lidar: self.executor.lidar,
            camera: self.executor.camera,
            tilt_limits: self.executor.tilt_limits,
            plan_margin: self.expert.plan_margin,
        }
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Resolves an underscore-joined path such as `planner_weights_w_lookat`
/// against nested object keys that may themselves contain underscores.
fn lookup<'a>(node: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    let Value::Object(map) = node else {
        return None;
    };
    let name = map
        .keys()
        .filter(|k| {
            key == k.as_str() || (key.starts_with(k.as_str()) && key.as_bytes().get(k.len()) == Some(&b'_'))
        })
        .max_by_key(|k| k.len())?
        .clone();
    let child = map.get_mut(&name)?;
    if key.len() == name.len() {
        return match child {
            Value::Object(_) | Value::Array(_) => None,
            _ => Some(child),
        };
    }
    lookup(child, &key[name.len() + 1..])
}

fn parse_scalar(current: &Value, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    match current {
        Value::Bool(_) => raw.parse::<bool>().map(Value::Bool).map_err(|e| e.to_string()),
        Value::Number(n) if n.is_u64() || n.is_i64() => {
            if let Ok(v) = raw.parse::<u64>() {
                Ok(Value::from(v))
            } else {
                raw.parse::<i64>().map(Value::from).map_err(|e| e.to_string())
            }
        }
        Value::Number(_) => {
            let v: f64 = raw.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
            serde_json::Number::from_f64(v)
                .map(Value::Number)
                .ok_or_else(|| format!("{raw} is not finite"))
        }
        Value::String(_) => Ok(Value::String(raw.to_string())),
        _ => Err("not a scalar field".into()),
    }
}

/// Child seed for item `index` of stream `tag`, independent of work order.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Budget;

    fn vars(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn default_roundtrips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = RunConfig::from_toml_str(&text, Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_document_keeps_defaults() {
        let cfg = RunConfig::from_toml_str("[run]\nmaster_seed = 7\n[planner]\nbudget = { iterations = 2 }\n", Path::new("c")).unwrap();
        assert_eq!(cfg.run.master_seed, 7);
        assert_eq!(cfg.planner.budget, Budget::Iterations(2));
        assert_eq!(cfg.executor, ExecutorConfig::default());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = RunConfig::from_toml_str("[run]\nmaster_sed = 7\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("c.toml"), "{err}");
    }

    #[test]
    fn env_overrides_scalars_and_nested() {
        let cfg = RunConfig::default()
            .with_overrides(vars(&[
                ("AMR_RUN_MASTER_SEED", "42"),
                ("AMR_TASK_P_FFR", "0.25"),
                ("AMR_PLANNER_WEIGHTS_W_LOOKAT", "0.75"),
                ("AMR_PLANNER_BUDGET_ITERATIONS", "3"),
                ("AMR_EVAL_POLICY", "codec_roundtrip"),
                ("AMR_EVAL_RESIDUALS", "false"),
                ("HOME", "/root"),
            ]))
            .unwrap();
        assert_eq!(cfg.run.master_seed, 42);
        assert_eq!(cfg.task.p_ffr, 0.25);
        assert_eq!(cfg.planner.weights.w_lookat, 0.75);
        assert_eq!(cfg.planner.budget, Budget::Iterations(3));
        assert_eq!(cfg.eval.policy, PolicyKind::CodecRoundtrip);
        assert!(!cfg.eval.residuals);
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn bad_overrides_are_reported() {
        let base = RunConfig::default();
        for (k, v) in [("AMR_RUN_NOPE", "1"), ("AMR_RUN_MASTER_SEED", "x"), ("AMR_PLANNER_WEIGHTS", "1"), ("AMR_EVAL_POLICY", "random")] {
            let err = base.with_overrides(vars(&[(k, v)])).unwrap_err();
            assert!(err.to_string().contains(k), "{err}");
        }
    }

    #[test]
    fn validation_catches_mismatched_horizon() {
        let mut cfg = RunConfig::default();
        cfg.timing.horizon = 10;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        let mut cfg = RunConfig::default();
        cfg.task.radius_max = 0.8;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        let mut b = a.clone();
        b.executor.speed = 0.4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn derived_seeds() {
        assert_eq!(derive_seed(1, "scene", 0), derive_seed(1, "scene", 0));
        assert_ne!(derive_seed(1, "scene", 0), derive_seed(1, "scene", 1));
        assert_ne!(derive_seed(1, "scene", 0), derive_seed(2, "scene", 0));
        assert_ne!(derive_seed(1, "scene", 0), derive_seed(1, "task", 0));
        let direct = Sha256::new()
            .chain_update(1u64.to_le_bytes())
            .chain_update(5u64.to_le_bytes())
            .chain_update(b"scene")
            .chain_update(0u64.to_le_bytes())
            .finalize();
        assert_eq!(derive_seed(1, "scene", 0), u64::from_le_bytes(direct[..8].try_into().unwrap()));
    }
}
