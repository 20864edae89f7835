//! Execution stage: deploy a generated case, convert the mesh, set time
//! controls, run the solver and iterate classify → correct until the case
//! completes ten steps or the reflection budget runs out.

mod classify;
mod correct;
mod deploy;
mod executor;
mod mesh;
mod reflect;
mod sim;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LlmError, LlmRole, TokenUsage, Usd};

pub use classify::{PURPOSE_CONFIRM_MISSING, PURPOSE_LOCALIZE, PURPOSE_LOCATE_DIMENSION, classify_error, evidence_hash, first_fatal_block, ErrorHistory, HistoryEntry};
pub use correct::{
    correct, Correction, PURPOSE_APPLY, PURPOSE_CREATE_FILE, PURPOSE_FIX_DIMENSIONS, PURPOSE_PROPOSE, PURPOSE_REWRITE,
};
pub use deploy::{configure_temporal, deploy_case, write_file};
pub use executor::{Executor, ProcessExecutor, SimRun, SimulatedExecutor, ToolRun, CASE_LOG};
pub use mesh::{align_patch_types, convert_mesh, read_boundary, write_boundary, scan_fluent_msh, BoundaryPatch, MeshReport, MshZone};
pub use reflect::{deployed_violations, reflect_loop, RunEvent, RunInputs, CASE_SUBDIR, MANIFEST_SUBDIR, QA_LOG_FILE};
pub use sim::lint_case;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_reflections: u32,
    /// Identical consecutive diagnoses that trigger a full-file rewrite.
    pub persistent_threshold: u32,
    pub steady_steps: u32,
    /// Steps at which results are written: 0, write_every, 2·write_every, …
    pub write_every: u32,
    pub max_courant: f64,
    pub delta_t_incompressible: f64,
    pub delta_t_compressible: f64,
    #[serde(with = "secs")]
    pub solver_timeout: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_reflections: 30,
            persistent_threshold: 3,
            steady_steps: 10,
            write_every: 5,
            max_courant: 0.6,
            delta_t_incompressible: 1e-5,
            delta_t_compressible: 1e-8,
            solver_timeout: Duration::from_secs(600),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_reflections < 1 {
            return Err(RunError::Config("max_reflections must be at least 1".into()));
        }
        if self.persistent_threshold < 2 {
            return Err(RunError::Config("persistent_threshold must be at least 2".into()));
        }
        if self.steady_steps == 0 || self.write_every == 0 {
            return Err(RunError::Config("step counts must be positive".into()));
        }
        Ok(())
    }

    /// Write steps: {0, write_every, …, steady_steps}.
    pub fn write_steps(&self) -> Vec<u32> {
        (0..=self.steady_steps).step_by(self.write_every as usize).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    Dimension,
    MissingFile,
    Persistent,
    General,
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDiagnosis {
    pub category: ErrorCategory,
    pub target_file: Option<String>,
    /// Log excerpt: the first fatal-error block, or the log tail.
    pub evidence: String,
    pub evidence_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_name: Option<String>,
    /// Category the log itself indicates; differs from `category` only when escalated.
    pub base_category: ErrorCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    TenStepSuccess,
    Exhausted,
    HardFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub reflections: u32,
    pub usage_by_role: BTreeMap<LlmRole, TokenUsage>,
    pub cost_usd: Usd,
    pub final_diagnosis: Option<ErrorDiagnosis>,
    /// Why the run stopped early, for HardFailure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    pub case_dir: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("refusing to deploy into non-empty directory {0}")]
    DirNotEmpty(String),
    #[error("generated case has no files")]
    EmptyCase,
    #[error("system/controlDict is missing")]
    MissingControlDict,
    #[error("mesh conversion failed (exit {exit_code:?}): {message}")]
    Conversion { exit_code: Option<i32>, message: String },
    #[error("classification failed: {0}")]
    Classification(String),
    #[error("correction failed: {0}")]
    Correction(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

impl RunError {
    pub(crate) fn io(path: impl fmt::Display, e: impl fmt::Display) -> Self {
        RunError::Io(path.to_string(), e.to_string())
    }

    /// Errors that end the loop instead of counting as a failed cycle.
    pub fn is_hard(&self) -> bool {
        !matches!(self, RunError::Correction(_))
    }
}
