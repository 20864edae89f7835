//! C ABI over the foamagent library.
//!
//! Every function returns a [`CfaStatus`]. On failure the message is kept
//! per thread and read with [`cfa_last_error`]. Strings handed out through
//! `out` pointers are owned by the caller and released with
//! [`cfa_string_free`]; knowledge-base handles with [`cfa_kb_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use foamagent::foam::{expected_dimensions, normalize, FlowRegime};
use foamagent::kb::{export_database, ingest_tree, KnowledgeBase};
use foamagent::llm::{Gateway, LlmRole, MockProvider, PriceTable, RetryPolicy, TokenUsage};
use foamagent::runner::{RunConfig, RunStatus, SimulatedExecutor};
use foamagent::session::SessionService;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    NotFound = 5,
    Io = 6,
    /// The run finished without reaching ten solver steps.
    RunFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaRole {
    Reasoner = 0,
    Editor = 1,
}

/// Opaque knowledge base.
pub struct CfaKnowledgeBase(KnowledgeBase);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CfaStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: CfaStatus, msg: impl ToString) -> FfiResult<T> {
    Err(Failure(status, msg.to_string()))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CfaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside foamagent");
            CfaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(CfaStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(CfaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return fail(CfaStatus::NullArgument, "out is null");
    }
    let c = CString::new(s).or_else(|_| fail(CfaStatus::InvalidArgument, "result contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> FfiResult<()> {
    if out.is_null() {
        fail(CfaStatus::NullArgument, "out is null")
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn cfa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cfa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an OpenFOAM dictionary and writes it back in canonical form.
///
/// # Safety
/// `text_in` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfa_dict_normalize(text_in: *const c_char, out: *mut *mut c_char) -> CfaStatus {
    guard(|| {
        let src = text(text_in, "text")?;
        let canon = normalize(src).or_else(|e| fail(CfaStatus::ParseError, e))?;
        put_string(out, canon)
    })
}

/// Canonical dimension exponents of a field, in OpenFOAM order
/// (mass, length, time, temperature, moles, current, luminosity).
///
/// # Safety
/// `field` must be a NUL-terminated string; `out` must hold 7 ints.
#[no_mangle]
pub unsafe extern "C" fn cfa_expected_dimensions(field: *const c_char, compressible: bool, out: *mut i32) -> CfaStatus {
    guard(|| {
        let name = text(field, "field")?;
        check_out(out)?;
        let regime = if compressible {
            FlowRegime::Compressible
        } else {
            FlowRegime::Incompressible
        };
        let dims = expected_dimensions(name, regime).or_else(|e| fail(CfaStatus::NotFound, e))?;
        std::ptr::copy_nonoverlapping(dims.0.as_ptr(), out, 7);
        Ok(())
    })
}

/// USD cost of one call at the default prices, as a decimal string.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfa_call_cost(role: CfaRole, input_tokens: u64, output_tokens: u64, out: *mut *mut c_char) -> CfaStatus {
    guard(|| {
        let role = match role {
            CfaRole::Reasoner => LlmRole::Reasoner,
            CfaRole::Editor => LlmRole::Editor,
        };
        let cost = PriceTable::default().rates(role).cost(TokenUsage::new(input_tokens, output_tokens));
        put_string(out, cost.to_string())
    })
}

fn kb_error(e: foamagent::kb::KbError) -> Failure {
    use foamagent::kb::KbError;
    let status = match &e {
        KbError::Io(..) => CfaStatus::Io,
        KbError::UnknownSolver(_) | KbError::UnknownModel(_) => CfaStatus::NotFound,
        _ => CfaStatus::ParseError,
    };
    Failure(status, e.to_string())
}

unsafe fn put_kb(out: *mut *mut CfaKnowledgeBase, kb: KnowledgeBase) -> FfiResult<()> {
    check_out(out)?;
    *out = Box::into_raw(Box::new(CfaKnowledgeBase(kb)));
    Ok(())
}

/// Ingests a tutorial tree.
///
/// # Safety
/// `root` must be a NUL-terminated path; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfa_kb_ingest(root: *const c_char, out: *mut *mut CfaKnowledgeBase) -> CfaStatus {
    guard(|| {
        let kb = ingest_tree(Path::new(text(root, "root")?)).map_err(kb_error)?;
        put_kb(out, kb)
    })
}

/// Loads a database written by `cfa_kb_export` or `foamagent kb build`.
///
/// # Safety
/// `path` must be a NUL-terminated path; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfa_kb_load(path: *const c_char, out: *mut *mut CfaKnowledgeBase) -> CfaStatus {
    guard(|| {
        let kb = KnowledgeBase::load(Path::new(text(path, "path")?)).map_err(kb_error)?;
        put_kb(out, kb)
    })
}

/// # Safety
/// `kb` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cfa_kb_free(kb: *mut CfaKnowledgeBase) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Database document as JSON.
///
/// # Safety
/// `kb` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfa_kb_export(kb: *const CfaKnowledgeBase, out: *mut *mut c_char) -> CfaStatus {
    guard(|| {
        let kb = kb.as_ref().ok_or(Failure(CfaStatus::NullArgument, "kb is null".into()))?;
        put_string(out, export_database(&kb.0))
    })
}

/// Files a solver/model combination requires, one path per line.
/// `model` and `thermo` may be NULL.
///
/// # Safety
/// `kb` must be a live handle; strings NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cfa_kb_required_files(
    kb: *const CfaKnowledgeBase,
    solver: *const c_char,
    model: *const c_char,
    thermo: *const c_char,
    out: *mut *mut c_char,
) -> CfaStatus {
    guard(|| {
        let kb = kb.as_ref().ok_or(Failure(CfaStatus::NullArgument, "kb is null".into()))?;
        let set = kb
            .0
            .required_files(text(solver, "solver")?, opt_text(model, "model")?, opt_text(thermo, "thermo")?)
            .map_err(kb_error)?;
        put_string(out, set.iter().collect::<Vec<_>>().join("\n"))
    })
}

/// Offline run of the whole flow: document, case selection, mesh,
/// generation and the reflection loop, with LLM answers replayed from a
/// JSON script and a simulated executor. Writes the outcome JSON to `out`
/// and returns `CFA_STATUS_RUN_FAILED` when the case did not reach ten steps.
///
/// # Safety
/// Strings must be NUL-terminated (`kb_or_null` may be NULL); `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cfa_dry_run(
    document: *const c_char,
    mesh: *const c_char,
    script: *const c_char,
    label: *const c_char,
    workspace: *const c_char,
    kb_or_null: *const CfaKnowledgeBase,
    out: *mut *mut c_char,
) -> CfaStatus {
    guard(|| {
        let doc_path = PathBuf::from(text(document, "document")?);
        let mesh_path = PathBuf::from(text(mesh, "mesh")?);
        let script = Path::new(text(script, "script")?);
        let label = text(label, "label")?;
        let workspace = PathBuf::from(text(workspace, "workspace")?);
        check_out(out)?;
        let kb = kb_or_null.as_ref().map(|k| k.0.clone()).unwrap_or_default();

        let io = |p: &Path, e: std::io::Error| Failure(CfaStatus::Io, format!("{}: {e}", p.display()));
        let doc = std::fs::read_to_string(&doc_path).map_err(|e| io(&doc_path, e))?;
        let bytes = std::fs::read(&mesh_path).map_err(|e| io(&mesh_path, e))?;
        let provider = MockProvider::from_file(script).or_else(|e| fail(CfaStatus::Io, e))?;
        let gateway = Gateway::new(Arc::new(provider)).with_retry(RetryPolicy::immediate(1));
        let svc = SessionService::new(
            &workspace,
            Arc::new(kb),
            gateway,
            Arc::new(SimulatedExecutor::default()),
            RunConfig::default(),
        );
        let session = |e: foamagent::session::SessionError| Failure(CfaStatus::InvalidArgument, e.to_string());
        let id = svc.create().map_err(session)?.id;
        svc.submit_document(&id, &doc).map_err(session)?;
        svc.select_case(&id, label, &[]).map_err(session)?;
        svc.confirm(&id).map_err(session)?;
        let name = mesh_path.file_name().and_then(|n| n.to_str()).unwrap_or("mesh.msh");
        svc.attach_mesh(&id, name, &bytes).map_err(session)?;
        svc.launch(&id, None)
            .map_err(session)?
            .join()
            .or_else(|_| fail(CfaStatus::Panic, "run worker panicked"))?;

        let view = svc.view(&id).map_err(session)?;
        let Some(outcome) = view.outcome else {
            return fail(CfaStatus::RunFailed, view.failure.unwrap_or_else(|| "no outcome".into()));
        };
        let json = serde_json::to_string(&outcome).or_else(|e| fail(CfaStatus::InvalidArgument, e))?;
        put_string(out, json)?;
        if outcome.status != RunStatus::TenStepSuccess {
            return fail(CfaStatus::RunFailed, format!("run ended {:?}", outcome.status));
        }
        Ok(())
    })
}
