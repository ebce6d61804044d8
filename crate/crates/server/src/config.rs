use std::path::{Path, PathBuf};

use precplan_core::accuracy::AccuracyProxy;
use precplan_core::domain::TaskDistribution;
use precplan_core::planner::{SlotConfig, DEFAULT_EPSILON};
use precplan_core::profiling::LlmClientConfig;
use precplan_core::satisfaction::{Strategy, DEFAULT_BETA};
use precplan_core::store::DEFAULT_K;
use precplan_core::ValidationError;
use serde::{Deserialize, Serialize};

/// Server settings, read from one JSON file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    pub slots: SlotConfig,
    pub epsilon: f64,
    /// Clients scheduled per round (capped at the number of profiled clients).
    pub participation: usize,
    pub k: usize,
    pub strategy: Strategy,
    pub beta: f64,
    pub hint_share: f64,
    /// Where the case and hardware stores live; in memory when absent.
    pub data_dir: Option<PathBuf>,
    pub llm: LlmClientConfig,
    pub accuracy: AccuracyProxy,
    pub global_dist: TaskDistribution,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            slots: SlotConfig::uniform(10),
            epsilon: DEFAULT_EPSILON,
            participation: 10,
            k: DEFAULT_K,
            strategy: Strategy::Fedavg,
            beta: DEFAULT_BETA,
            hint_share: 0.5,
            data_dir: None,
            llm: LlmClientConfig::default(),
            accuracy: AccuracyProxy::default(),
            global_dist: TaskDistribution::voice_assistant(),
        }
    }
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: Self =
            serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {} at `{}`", path.display(), e.inner(), e.path()))?;
        config.validate().map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.slots.validate().map_err(|e| e.within("slots"))?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ValidationError::new("epsilon", "must be a non-negative number"));
        }
        if self.participation == 0 {
            return Err(ValidationError::new("participation", "must be positive"));
        }
        if self.k == 0 {
            return Err(ValidationError::new("k", "must be positive"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ValidationError::new("beta", "must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.hint_share) {
            return Err(ValidationError::new("hint_share", "must lie in [0, 1]"));
        }
        self.accuracy.validate().map_err(|e| e.within("accuracy"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_takes_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("server.json");
        std::fs::write(&path, r#"{"epsilon": 0.1, "slots": {"capacity": {"INT8": 3}}}"#).unwrap();
        let c = ServerConfig::load(&path).unwrap();
        assert_eq!(c.epsilon, 0.1);
        assert_eq!(c.slots.capacity_of(precplan_core::domain::QuantizationLevel::Int8), 3);
        assert_eq!(c.k, DEFAULT_K);
    }

    #[test]
    fn bad_fields_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("server.json");
        std::fs::write(&path, r#"{"strategy": "greedy"}"#).unwrap();
        assert!(ServerConfig::load(&path).unwrap_err().contains("strategy"));
        std::fs::write(&path, r#"{"slots": {"capacity": {"INT8": 0}}}"#).unwrap();
        assert!(ServerConfig::load(&path).unwrap_err().contains("slots.capacity"));
    }
}
