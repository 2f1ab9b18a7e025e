use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tutorgraph_core::engine::{EngineConfig, OutputGrader, DEFAULT_STEP_CAP};
use tutorgraph_core::planner::RefinementLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    pub step_cap: u32,
    pub output_grader: OutputGrader,
    pub limits: RefinementLimits,
    /// When set, every request needs `Authorization: Bearer <token>`.
    pub api_token: Option<String>,
    /// Pause inside the per-session critical section of a submission. Only
    /// useful for exercising the concurrency contract.
    pub transition_delay_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            step_cap: DEFAULT_STEP_CAP,
            output_grader: OutputGrader::default(),
            limits: RefinementLimits::default(),
            api_token: None,
            transition_delay_ms: 0,
        }
    }
}

impl ServiceConfig {
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            step_cap: self.step_cap,
            output_grader: self.output_grader,
        }
    }

    pub fn transition_delay(&self) -> Duration {
        Duration::from_millis(self.transition_delay_ms)
    }
}
