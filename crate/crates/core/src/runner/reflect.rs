use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::classify::{classify_error, ErrorHistory};
use super::correct::{correct, Correction};
use super::deploy::{configure_temporal, deploy_case};
use super::executor::{Executor, ToolRun};
use super::mesh::{align_patch_types, convert_mesh, MeshReport};
use super::{ErrorDiagnosis, RunConfig, RunError, RunOutcome, RunStatus};
use crate::builder::{spec_violations, GeneratedCase, SpecViolation, TimeMode};
use crate::foam::{parse_dictionary, FlowRegime};
use crate::kb::KnowledgeBase;
use crate::llm::{compute_cost, Gateway, LlmRole, TokenUsage, Usd};

pub const CASE_SUBDIR: &str = "case";
pub const MANIFEST_SUBDIR: &str = "manifest";
pub const QA_LOG_FILE: &str = "qa_log.jsonl";

pub struct RunInputs<'a> {
    pub generated: &'a GeneratedCase,
    pub mesh: &'a Path,
    /// Run workspace; the case goes to `work_dir/case`.
    pub work_dir: &'a Path,
    pub kb: &'a KnowledgeBase,
    pub gateway: &'a Gateway,
    pub executor: &'a dyn Executor,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Deployed { case_dir: String, files: usize },
    MeshConverted { report: MeshReport },
    TemporalConfigured,
    ExecutionFinished { attempt: u32, exit_code: Option<i32>, timed_out: bool },
    Diagnosed { iteration: u32, diagnosis: ErrorDiagnosis },
    Corrected { iteration: u32, correction: Correction },
    CorrectionFailed { iteration: u32, message: String },
    Finished { outcome: RunOutcome },
}

#[derive(Serialize)]
struct Manifest<'a> {
    iteration: u32,
    exit_code: Option<i32>,
    timed_out: bool,
    diagnosis: &'a ErrorDiagnosis,
    patched_files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correction_error: Option<String>,
    usage: BTreeMap<LlmRole, TokenUsage>,
    cost_usd: Usd,
}

fn usage_since(gateway: &Gateway, from: usize) -> (BTreeMap<LlmRole, TokenUsage>, Usd) {
    let log = gateway.log();
    let mut by_role: BTreeMap<LlmRole, TokenUsage> = BTreeMap::new();
    for e in &log.entries()[from.min(log.len())..] {
        *by_role.entry(e.role).or_default() += e.usage;
    }
    let cost = compute_cost(by_role.iter().map(|(r, u)| (*r, *u)), gateway.prices());
    (by_role, Usd(cost))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent.display(), e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| RunError::io(path.display(), e))
}

fn write_qa_log(gateway: &Gateway, work_dir: &Path) -> Result<(), RunError> {
    let path = work_dir.join(QA_LOG_FILE);
    let mut out = String::new();
    for e in gateway.log().entries() {
        out.push_str(&serde_json::to_string(e).expect("exchange serializes"));
        out.push('\n');
    }
    std::fs::write(&path, out).map_err(|e| RunError::io(path.display(), e))
}

/// Times at which a successful run must have written results.
fn expected_write_times(inputs: &RunInputs) -> Vec<f64> {
    let spec = &inputs.generated.spec;
    let cfg = &inputs.config;
    let dt = match spec.time_mode {
        TimeMode::Steady => 1.0,
        TimeMode::Transient if spec.flow_regime == FlowRegime::Compressible => cfg.delta_t_compressible,
        TimeMode::Transient => cfg.delta_t_incompressible,
    };
    cfg.write_steps().into_iter().map(|s| f64::from(s) * dt).collect()
}

fn time_dirs(case_dir: &Path) -> Vec<f64> {
    std::fs::read_dir(case_dir)
        .map(|rd| {
            rd.flatten()
                .filter(|e| e.path().is_dir())
                .filter_map(|e| e.file_name().to_str()?.parse::<f64>().ok())
                .collect()
        })
        .unwrap_or_default()
}

/// Ten-step criterion: the log reports at least `steady_steps` time steps
/// and every write time has a directory.
pub(crate) fn reached_goal(run: &ToolRun, case_dir: &Path, inputs: &RunInputs) -> bool {
    static STEP: OnceLock<Regex> = OnceLock::new();
    let re = STEP.get_or_init(|| Regex::new(r"(?m)^Time = \S+").unwrap());
    if !run.success() || re.find_iter(&run.log).count() < inputs.config.steady_steps as usize {
        return false;
    }
    let dirs = time_dirs(case_dir);
    expected_write_times(inputs).iter().all(|t| {
        let tol = 1e-6 * t.abs().max(f64::MIN_POSITIVE);
        dirs.iter().any(|d| (d - t).abs() <= tol)
    })
}

/// Boundary types in deployed field files that differ from the specification.
pub fn deployed_violations(case_dir: &Path, spec: &crate::builder::CaseSpecification) -> Vec<SpecViolation> {
    let mut files = Vec::new();
    if let Ok(rd) = std::fs::read_dir(case_dir.join("0")) {
        for e in rd.flatten().filter(|e| e.path().is_file()) {
            let rel = format!("0/{}", e.file_name().to_string_lossy());
            match std::fs::read_to_string(e.path()).map_err(|e| e.to_string()).and_then(|t| parse_dictionary(&t).map_err(|e| e.to_string())) {
                Ok(d) => files.push((rel, d)),
                Err(message) => {
                    return vec![SpecViolation::Unreadable { path: rel, message }];
                }
            }
        }
    }
    spec_violations(spec, files.iter().map(|(p, d)| (p.as_str(), d)))
}

struct Loop<'a, 'b> {
    inputs: &'a RunInputs<'a>,
    observer: &'b mut dyn FnMut(&RunEvent),
    case_dir: PathBuf,
}

impl Loop<'_, '_> {
    fn emit(&mut self, e: RunEvent) {
        (self.observer)(&e);
    }

    fn outcome(&self, status: RunStatus, reflections: u32, last: Option<ErrorDiagnosis>, cause: Option<String>) -> RunOutcome {
        let gw = self.inputs.gateway;
        let usage_by_role = gw.log().usage_by_role();
        RunOutcome {
            status,
            reflections,
            usage_by_role,
            cost_usd: Usd(gw.total_cost()),
            final_diagnosis: last,
            cause,
            case_dir: self.case_dir.display().to_string(),
        }
    }

    fn prepare(&mut self) -> Result<(), RunError> {
        let inputs = self.inputs;
        inputs.config.validate()?;
        deploy_case(inputs.generated, &self.case_dir)?;
        self.emit(RunEvent::Deployed {
            case_dir: self.case_dir.display().to_string(),
            files: inputs.generated.files.len(),
        });
        let report = convert_mesh(inputs.mesh, &self.case_dir, inputs.executor)?;
        align_patch_types(&self.case_dir, &inputs.generated.spec)?;
        self.emit(RunEvent::MeshConverted { report });
        configure_temporal(&self.case_dir, &inputs.generated.spec, &inputs.config)?;
        self.emit(RunEvent::TemporalConfigured);
        Ok(())
    }

    fn hard_failure(&self, e: RunError, reflections: u32, last: Option<ErrorDiagnosis>) -> RunOutcome {
        self.outcome(RunStatus::HardFailure, reflections, last, Some(e.to_string()))
    }

    fn run(&mut self) -> RunOutcome {
        let inputs = self.inputs;
        let spec = &inputs.generated.spec;
        let cfg = inputs.config;
        let manifest_dir = inputs.work_dir.join(MANIFEST_SUBDIR);
        let mut history = ErrorHistory::default();
        let mut reflections = 0u32;
        let mut last: Option<ErrorDiagnosis> = None;
        loop {
            let attempt = reflections + 1;
            let run = match inputs.executor.run_solver(&spec.solver, &self.case_dir, cfg.solver_timeout) {
                Ok(r) => r,
                Err(e) => return self.hard_failure(e, reflections, last),
            };
            self.emit(RunEvent::ExecutionFinished {
                attempt,
                exit_code: run.exit_code,
                timed_out: run.timed_out,
            });
            if reached_goal(&run, &self.case_dir, inputs) {
                return self.outcome(RunStatus::TenStepSuccess, reflections, last, None);
            }

            let log_mark = inputs.gateway.log().len();
            let diagnosis = match classify_error(&run, &history, &self.case_dir, spec, inputs.gateway, cfg.persistent_threshold) {
                Ok(d) => d,
                Err(e) => return self.hard_failure(e, reflections, last),
            };
            history.record(attempt, &diagnosis);
            last = Some(diagnosis.clone());
            self.emit(RunEvent::Diagnosed {
                iteration: attempt,
                diagnosis: diagnosis.clone(),
            });
            if reflections >= cfg.max_reflections {
                return self.outcome(RunStatus::Exhausted, reflections, last, None);
            }

            reflections += 1;
            let (patched, correction_error) = match correct(&diagnosis, &self.case_dir, spec, inputs.kb, inputs.gateway) {
                Ok(c) => {
                    let files = c.patched.clone();
                    self.emit(RunEvent::Corrected {
                        iteration: attempt,
                        correction: c,
                    });
                    (files, None)
                }
                Err(e) if !e.is_hard() => {
                    self.emit(RunEvent::CorrectionFailed {
                        iteration: attempt,
                        message: e.to_string(),
                    });
                    (Vec::new(), Some(e.to_string()))
                }
                Err(e) => return self.hard_failure(e, reflections, last),
            };
            let violations = deployed_violations(&self.case_dir, spec);
            if !violations.is_empty() {
                log::error!("deployed files depart from the specification: {violations:?}");
            }
            let (usage, cost_usd) = usage_since(inputs.gateway, log_mark);
            let manifest = Manifest {
                iteration: attempt,
                exit_code: run.exit_code,
                timed_out: run.timed_out,
                diagnosis: &diagnosis,
                patched_files: patched,
                correction_error,
                usage,
                cost_usd,
            };
            if let Err(e) = write_json(&manifest_dir.join(format!("iteration_{attempt:03}.json")), &manifest) {
                return self.hard_failure(e, reflections, last);
            }
        }
    }
}

/// Deploys, converts the mesh, sets time controls, then alternates solver
/// runs with classification and correction until ten steps complete or
/// `max_reflections` corrections have been tried.
pub fn reflect_loop(inputs: &RunInputs, observer: &mut dyn FnMut(&RunEvent)) -> RunOutcome {
    let mut lp = Loop {
        inputs,
        observer,
        case_dir: inputs.work_dir.join(CASE_SUBDIR),
    };
    let outcome = match lp.prepare() {
        Err(e) => lp.outcome(RunStatus::HardFailure, 0, None, Some(e.to_string())),
        Ok(()) => lp.run(),
    };
    if let Err(e) = write_qa_log(inputs.gateway, inputs.work_dir) {
        log::error!("cannot write QA log: {e}");
    }
    lp.emit(RunEvent::Finished {
        outcome: outcome.clone(),
    });
    outcome
}
