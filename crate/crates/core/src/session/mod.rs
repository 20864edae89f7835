//! Interactive workflow ahead of a run: document, candidate cases, a
//! confirmed specification, a mesh, then launch. A session's state is the
//! fold of its numbered event log, which is also what clients stream.

mod http;

pub use http::router;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use crate::builder::{
    ask_structured, collect_references, derive_file_list, extract_case_spec, generate_files, validate_boundaries,
    BuildError, CaseSpecification, StructuredError, ValidationReport,
};
use crate::kb::KnowledgeBase;
use crate::llm::{Gateway, LlmError, LlmRole, QaLog};
use crate::retrieval::{segment_document, Segment};
use crate::runner::{reflect_loop, scan_fluent_msh, Executor, RunConfig, RunEvent, RunInputs, RunOutcome, RunStatus};

pub const PURPOSE_EXTRACT_CASES: &str = "extract-cases";
pub const PURPOSE_AMEND: &str = "amend-spec";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SESSION_QA_LOG: &str = "qa_log.jsonl";
pub const RUN_SUBDIR: &str = "run";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionState {
    AwaitingInput,
    CasesExtracted,
    CaseSelected,
    MeshAttached,
    Building,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCandidate {
    pub label: String,
    pub summary: String,
    /// Labels of the document segments describing this case.
    pub segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshCheck {
    pub file: String,
    pub patches: Vec<String>,
    pub report: ValidationReport,
}

impl MeshCheck {
    pub fn is_clean(&self) -> bool {
        self.report.is_clean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created { id: String },
    DocumentSubmitted { text: String },
    CasesExtracted { candidates: Vec<CaseCandidate> },
    CaseProposed { label: String, spec: CaseSpecification },
    SpecAmended { spec: CaseSpecification },
    CaseConfirmed { label: String, spec: CaseSpecification },
    MeshChecked { check: MeshCheck, attached: bool },
    BuildStarted,
    FileGenerated { path: String },
    RunStarted,
    IterationCompleted { iteration: u32, diagnosis: crate::runner::ErrorDiagnosis },
    RunProgress { detail: RunEvent },
    Completed { outcome: RunOutcome },
    Failed { cause: String, outcome: Option<RunOutcome> },
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::Created { .. } => "created",
            SessionEvent::DocumentSubmitted { .. } => "document_submitted",
            SessionEvent::CasesExtracted { .. } => "cases_extracted",
            SessionEvent::CaseProposed { .. } => "case_proposed",
            SessionEvent::SpecAmended { .. } => "spec_amended",
            SessionEvent::CaseConfirmed { .. } => "case_confirmed",
            SessionEvent::MeshChecked { .. } => "mesh_checked",
            SessionEvent::BuildStarted => "build_started",
            SessionEvent::FileGenerated { .. } => "file_generated",
            SessionEvent::RunStarted => "run_started",
            SessionEvent::IterationCompleted { .. } => "iteration_completed",
            SessionEvent::RunProgress { .. } => "run_progress",
            SessionEvent::Completed { .. } => "completed",
            SessionEvent::Failed { .. } => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, SessionEvent::Completed { .. } | SessionEvent::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// Everything a client can know about a session, rebuilt from events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub document: Option<String>,
    pub candidates: Vec<CaseCandidate>,
    /// Specification awaiting confirmation.
    pub proposed: Option<(String, CaseSpecification)>,
    pub chosen_label: Option<String>,
    pub chosen: Option<CaseSpecification>,
    pub mesh: Option<MeshCheck>,
    pub generated_files: Vec<String>,
    pub iterations: u32,
    pub outcome: Option<RunOutcome>,
    pub failure: Option<String>,
    pub last_seq: u64,
}

impl SessionView {
    fn empty() -> Self {
        SessionView {
            id: String::new(),
            state: SessionState::AwaitingInput,
            document: None,
            candidates: Vec::new(),
            proposed: None,
            chosen_label: None,
            chosen: None,
            mesh: None,
            generated_files: Vec::new(),
            iterations: 0,
            outcome: None,
            failure: None,
            last_seq: 0,
        }
    }

    pub fn replay<'a>(records: impl IntoIterator<Item = &'a EventRecord>) -> Self {
        let mut v = SessionView::empty();
        for r in records {
            v.apply(r);
        }
        v
    }

    fn apply(&mut self, r: &EventRecord) {
        self.last_seq = r.seq;
        match &r.event {
            SessionEvent::Created { id } => {
                self.id = id.clone();
                self.state = SessionState::AwaitingInput;
            }
            SessionEvent::DocumentSubmitted { text } => self.document = Some(text.clone()),
            SessionEvent::CasesExtracted { candidates } => {
                self.candidates = candidates.clone();
                if !candidates.is_empty() {
                    self.state = SessionState::CasesExtracted;
                }
            }
            SessionEvent::CaseProposed { label, spec } => self.proposed = Some((label.clone(), spec.clone())),
            SessionEvent::SpecAmended { spec } => match (&mut self.proposed, self.state) {
                (_, SessionState::CaseSelected) => self.chosen = Some(spec.clone()),
                (Some((_, s)), _) => *s = spec.clone(),
                (None, _) => {}
            },
            SessionEvent::CaseConfirmed { label, spec } => {
                self.chosen_label = Some(label.clone());
                self.chosen = Some(spec.clone());
                self.proposed = None;
                self.state = SessionState::CaseSelected;
            }
            SessionEvent::MeshChecked { check, attached } => {
                if *attached {
                    self.mesh = Some(check.clone());
                    self.state = SessionState::MeshAttached;
                }
            }
            SessionEvent::BuildStarted => self.state = SessionState::Building,
            SessionEvent::FileGenerated { path } => self.generated_files.push(path.clone()),
            SessionEvent::RunStarted => self.state = SessionState::Running,
            SessionEvent::IterationCompleted { .. } => self.iterations += 1,
            SessionEvent::RunProgress { .. } => {}
            SessionEvent::Completed { outcome } => {
                self.outcome = Some(outcome.clone());
                self.state = SessionState::Completed;
            }
            SessionEvent::Failed { cause, outcome } => {
                self.failure = Some(cause.clone());
                self.outcome = outcome.clone();
                self.state = SessionState::Failed;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("session is {actual:?}; this needs {expected}")]
    StateConflict { expected: String, actual: SessionState },
    #[error("document is empty")]
    EmptyDocument,
    #[error("no candidate case labelled '{0}'")]
    UnknownLabel(String),
    #[error("no specification awaits confirmation")]
    NothingProposed,
    #[error("unsupported mesh format: {0} (expected a Fluent .msh file)")]
    UnsupportedFormat(String),
    #[error("mesh does not match the specification")]
    MeshFindings(Box<MeshCheck>),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{0}")]
    Io(String),
}

impl From<BuildError> for SessionError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Llm(e) => SessionError::Llm(e),
            other => SessionError::Extraction(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SessionError {
    SessionError::Io(format!("{}: {e}", path.display()))
}

struct Inner {
    view: SessionView,
    records: Vec<EventRecord>,
}

pub struct SessionHandle {
    workspace: PathBuf,
    gateway: Gateway,
    inner: Mutex<Inner>,
    tx: broadcast::Sender<EventRecord>,
}

impl SessionHandle {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn emit_locked(&self, inner: &mut Inner, event: SessionEvent) -> Result<EventRecord, SessionError> {
        use std::io::Write;
        let rec = EventRecord {
            seq: inner.view.last_seq + 1,
            at: Utc::now(),
            event,
        };
        let path = self.workspace.join(EVENTS_FILE);
        let line = serde_json::to_string(&rec).expect("event serializes");
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| writeln!(f, "{line}"))
            .map_err(|e| io_err(&path, e))?;
        inner.view.apply(&rec);
        inner.records.push(rec.clone());
        // no subscriber is fine
        let _ = self.tx.send(rec.clone());
        Ok(rec)
    }

    fn emit(&self, event: SessionEvent) -> Result<EventRecord, SessionError> {
        let mut inner = self.lock();
        self.emit_locked(&mut inner, event)
    }

    pub fn workspace(&self) -> &Path {
        &self.workspace
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }
}

fn require(view: &SessionView, allowed: &[SessionState]) -> Result<(), SessionError> {
    if allowed.contains(&view.state) {
        Ok(())
    } else {
        let expected = allowed.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(" or ");
        Err(SessionError::StateConflict {
            expected,
            actual: view.state,
        })
    }
}

#[derive(Deserialize)]
struct CasesAnswer {
    cases: Vec<CandidateAnswer>,
}

#[derive(Deserialize)]
struct CandidateAnswer {
    summary: String,
    segments: Vec<String>,
}

fn structured(e: StructuredError) -> SessionError {
    match e {
        StructuredError::Llm(e) => SessionError::Llm(e),
        StructuredError::Invalid(m) => SessionError::Extraction(m),
    }
}

/// Owns all sessions under one workspace root.
pub struct SessionService {
    root: PathBuf,
    kb: Arc<KnowledgeBase>,
    gateway: Gateway,
    executor: Arc<dyn Executor>,
    run_config: RunConfig,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl SessionService {
    pub fn new(root: &Path, kb: Arc<KnowledgeBase>, gateway: Gateway, executor: Arc<dyn Executor>, run_config: RunConfig) -> Self {
        SessionService {
            root: root.to_path_buf(),
            kb,
            gateway,
            executor,
            run_config,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, SessionError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn create(&self) -> Result<SessionView, SessionError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let workspace = self.root.join(&id);
        std::fs::create_dir_all(&workspace).map_err(|e| io_err(&workspace, e))?;
        let gateway = self.gateway.fork(QaLog::persisted(&workspace.join(SESSION_QA_LOG)));
        let (tx, _) = broadcast::channel(4096);
        let handle = Arc::new(SessionHandle {
            workspace,
            gateway,
            inner: Mutex::new(Inner {
                view: SessionView::empty(),
                records: Vec::new(),
            }),
            tx,
        });
        handle.emit(SessionEvent::Created { id: id.clone() })?;
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.clone(), handle.clone());
        let view = handle.lock().view.clone();
        Ok(view)
    }

    pub fn view(&self, id: &str) -> Result<SessionView, SessionError> {
        Ok(self.handle(id)?.lock().view.clone())
    }

    /// Events after `after`, and a receiver for the ones that follow them.
    pub fn subscribe(&self, id: &str, after: u64) -> Result<(Vec<EventRecord>, broadcast::Receiver<EventRecord>), SessionError> {
        let h = self.handle(id)?;
        let inner = h.lock();
        let rx = h.tx.subscribe();
        let backlog = inner.records.iter().filter(|r| r.seq > after).cloned().collect();
        Ok((backlog, rx))
    }

    /// Catalogs the cases a document describes. A document with no
    /// recognisable case leaves the session waiting for input.
    pub fn submit_document(&self, id: &str, text: &str) -> Result<Vec<CaseCandidate>, SessionError> {
        let h = self.handle(id)?;
        let mut inner = h.lock();
        require(&inner.view, &[SessionState::AwaitingInput])?;
        if text.trim().is_empty() {
            return Err(SessionError::EmptyDocument);
        }
        let segments = segment_document(text);
        let labels: Vec<&str> = segments.iter().map(|s| s.label.as_str()).collect();
        let sections: String = segments.iter().map(|s| format!("### {}\n{}\n\n", s.label, s.text)).collect();
        let prompt = format!(
            "The document below is split into labelled sections. Identify every distinct CFD simulation case it \
             describes. For each case give a one-line summary naming solver, turbulence model and geometry, and \
             the labels of the sections that describe it.\nAnswer with a JSON object: {{\"cases\": [{{\"label\": \
             \"Case 1\", \"summary\": str, \"segments\": [section label, ...]}}]}}.\n\n{sections}"
        );
        let answer: CasesAnswer = ask_structured(&h.gateway, LlmRole::Reasoner, PURPOSE_EXTRACT_CASES, prompt, |a: CasesAnswer| {
            for c in &a.cases {
                if c.summary.trim().is_empty() {
                    return Err("every case needs a summary".into());
                }
                if let Some(bad) = c.segments.iter().find(|s| !labels.contains(&s.as_str())) {
                    return Err(format!("'{bad}' is not a section label"));
                }
            }
            Ok(a)
        })
        .map_err(structured)?;
        // labels are assigned here so they are sequential whatever the model wrote
        let candidates: Vec<CaseCandidate> = answer
            .cases
            .into_iter()
            .enumerate()
            .map(|(i, c)| CaseCandidate {
                label: format!("Case {}", i + 1),
                summary: c.summary.trim().to_string(),
                segments: c.segments,
            })
            .collect();
        h.emit_locked(&mut inner, SessionEvent::DocumentSubmitted { text: text.to_string() })?;
        h.emit_locked(&mut inner, SessionEvent::CasesExtracted { candidates: candidates.clone() })?;
        Ok(candidates)
    }

    /// Extracts the specification of one candidate for confirmation.
    /// Dialogue turns are read as additional description.
    pub fn select_case(&self, id: &str, label: &str, dialogue: &[String]) -> Result<CaseSpecification, SessionError> {
        let h = self.handle(id)?;
        let mut inner = h.lock();
        require(&inner.view, &[SessionState::CasesExtracted])?;
        let cand = inner
            .view
            .candidates
            .iter()
            .find(|c| c.label == label)
            .cloned()
            .ok_or_else(|| SessionError::UnknownLabel(label.to_string()))?;
        let document = inner.view.document.clone().unwrap_or_default();
        let mut segments: Vec<Segment> = segment_document(&document)
            .into_iter()
            .filter(|s| cand.segments.contains(&s.label))
            .collect();
        if !dialogue.is_empty() {
            segments.push(Segment::new("dialogue", &dialogue.join("\n")));
        }
        let spec = extract_case_spec(label, &segments, &h.gateway, &self.kb)?;
        h.emit_locked(
            &mut inner,
            SessionEvent::CaseProposed {
                label: label.to_string(),
                spec: spec.clone(),
            },
        )?;
        Ok(spec)
    }

    /// Revises the proposed (or confirmed, before a mesh is attached)
    /// specification from a natural-language request.
    pub fn amend(&self, id: &str, request: &str) -> Result<CaseSpecification, SessionError> {
        let h = self.handle(id)?;
        let mut inner = h.lock();
        require(&inner.view, &[SessionState::CasesExtracted, SessionState::CaseSelected])?;
        let current = match inner.view.state {
            SessionState::CaseSelected => inner.view.chosen.clone(),
            _ => inner.view.proposed.as_ref().map(|(_, s)| s.clone()),
        }
        .ok_or(SessionError::NothingProposed)?;
        let json = serde_json::to_string_pretty(&current).expect("spec serializes");
        let prompt = format!(
            "Case specification:\n{json}\n\nThe user asks for this change:\n{request}\n\n\
             Apply exactly that change and reply with the complete updated specification as a JSON object of the same shape."
        );
        let name = current.name.clone();
        let spec: CaseSpecification = ask_structured(&h.gateway, LlmRole::Reasoner, PURPOSE_AMEND, prompt, |mut s: CaseSpecification| {
            s.name = name.clone();
            s.check()?;
            let r = validate_boundaries(&s, s.patch_names());
            if !(r.unknown_types.is_empty() && r.near_misses.is_empty() && r.inapplicable.is_empty()) {
                return Err(format!("boundary types not in the catalog or not applicable: {r:?}"));
            }
            Ok(s)
        })
        .map_err(structured)?;
        h.emit_locked(&mut inner, SessionEvent::SpecAmended { spec: spec.clone() })?;
        Ok(spec)
    }

    pub fn confirm(&self, id: &str) -> Result<CaseSpecification, SessionError> {
        let h = self.handle(id)?;
        let mut inner = h.lock();
        require(&inner.view, &[SessionState::CasesExtracted])?;
        let (label, spec) = inner.view.proposed.clone().ok_or(SessionError::NothingProposed)?;
        h.emit_locked(&mut inner, SessionEvent::CaseConfirmed { label, spec: spec.clone() })?;
        Ok(spec)
    }

    /// Stores an uploaded mesh and checks its patches against the
    /// specification. Findings leave the session where it was.
    pub fn attach_mesh(&self, id: &str, file_name: &str, bytes: &[u8]) -> Result<MeshCheck, SessionError> {
        let h = self.handle(id)?;
        let mut inner = h.lock();
        require(&inner.view, &[SessionState::CaseSelected])?;
        let name = Path::new(file_name)
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .to_string();
        if !name.to_ascii_lowercase().ends_with(".msh") {
            return Err(SessionError::UnsupportedFormat(file_name.to_string()));
        }
        let dir = h.workspace.join("mesh");
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = dir.join(&name);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        let info = scan_fluent_msh(&path).map_err(|e| SessionError::UnsupportedFormat(e.to_string()))?;
        let patches: Vec<String> = info.boundary_zones().map(|z| z.name.clone()).collect();
        let spec = inner.view.chosen.clone().expect("CaseSelected has a spec");
        let report = validate_boundaries(&spec, patches.iter().map(String::as_str));
        let check = MeshCheck {
            file: path.display().to_string(),
            patches,
            report,
        };
        let attached = check.is_clean();
        h.emit_locked(
            &mut inner,
            SessionEvent::MeshChecked {
                check: check.clone(),
                attached,
            },
        )?;
        if attached {
            Ok(check)
        } else {
            Err(SessionError::MeshFindings(Box::new(check)))
        }
    }

    /// Starts generation and the reflection loop on a worker thread.
    pub fn launch(&self, id: &str, config: Option<RunConfig>) -> Result<JoinHandle<()>, SessionError> {
        let h = self.handle(id)?;
        let (spec, mesh) = {
            let mut inner = h.lock();
            require(&inner.view, &[SessionState::MeshAttached])?;
            let spec = inner.view.chosen.clone().expect("MeshAttached has a spec");
            let mesh = PathBuf::from(&inner.view.mesh.as_ref().expect("MeshAttached has a mesh").file);
            h.emit_locked(&mut inner, SessionEvent::BuildStarted)?;
            (spec, mesh)
        };
        let kb = self.kb.clone();
        let executor = self.executor.clone();
        let config = config.unwrap_or(self.run_config);
        Ok(std::thread::spawn(move || {
            if let Err(e) = run_worker(&h, &spec, &mesh, &kb, executor.as_ref(), config) {
                log::error!("session worker: {e}");
            }
        }))
    }

    pub fn outcome(&self, id: &str) -> Result<Option<RunOutcome>, SessionError> {
        Ok(self.view(id)?.outcome)
    }
}

fn run_worker(
    h: &SessionHandle,
    spec: &CaseSpecification,
    mesh: &Path,
    kb: &KnowledgeBase,
    executor: &dyn Executor,
    config: RunConfig,
) -> Result<(), SessionError> {
    let built = derive_file_list(spec, kb).and_then(|list| {
        let refs = collect_references(spec, &list, kb);
        generate_files(spec, &list, &refs, &h.gateway)
    });
    let generated = match built {
        Ok(g) => g,
        Err(e) => {
            h.emit(SessionEvent::Failed {
                cause: e.to_string(),
                outcome: None,
            })?;
            return Ok(());
        }
    };
    for path in generated.paths() {
        h.emit(SessionEvent::FileGenerated { path: path.to_string() })?;
    }
    h.emit(SessionEvent::RunStarted)?;

    let work_dir = h.workspace.join(RUN_SUBDIR);
    let mut emit_err = None;
    let outcome = reflect_loop(
        &RunInputs {
            generated: &generated,
            mesh,
            work_dir: &work_dir,
            kb,
            gateway: &h.gateway,
            executor,
            config,
        },
        &mut |e| {
            let event = match e {
                RunEvent::Finished { .. } => return,
                RunEvent::Diagnosed { iteration, diagnosis } => SessionEvent::IterationCompleted {
                    iteration: *iteration,
                    diagnosis: diagnosis.clone(),
                },
                other => SessionEvent::RunProgress { detail: other.clone() },
            };
            if let Err(err) = h.emit(event) {
                emit_err.get_or_insert(err);
            }
        },
    );
    if let Some(e) = emit_err {
        log::warn!("session event not persisted: {e}");
    }
    let last = match outcome.status {
        RunStatus::HardFailure => SessionEvent::Failed {
            cause: outcome.cause.clone().unwrap_or_else(|| "hard failure".into()),
            outcome: Some(outcome),
        },
        _ => SessionEvent::Completed { outcome },
    };
    h.emit(last)?;
    Ok(())
}

/// Reads a persisted event log back.
pub fn read_events(path: &Path) -> std::io::Result<Vec<EventRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
        .collect()
}
