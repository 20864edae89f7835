mod common;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::*;
use foamagent::builder::{build_case, CaseSpecification, GeneratedCase, TimeMode};
use foamagent::foam::{parse_dictionary, FieldFile, FlowRegime, FoamDictionary};
use foamagent::kb::KnowledgeBase;
use foamagent::llm::{ChatRequest, ChatResponse, FnProvider, Gateway, LlmRole, ProviderFailure, QaLog, TokenUsage};
use foamagent::retrieval::segment_document;
use foamagent::runner::*;

fn read_dict(path: &Path) -> FoamDictionary {
    parse_dictionary(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// -- deployment ---------------------------------------------------------

#[test]
fn deployed_files_read_back_equal() {
    let g = case1_generated();
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    deploy_case(&g, &case).unwrap();
    for (rel, d) in &g.files {
        assert_eq!(&read_dict(&case.join(rel)), d, "{rel}");
    }
    assert!(matches!(deploy_case(&g, &case), Err(RunError::DirNotEmpty(_))));
    let empty = GeneratedCase {
        files: Default::default(),
        spec: case1_spec(),
    };
    assert!(matches!(deploy_case(&empty, &dir.path().join("other")), Err(RunError::EmptyCase)));
}

// -- mesh ---------------------------------------------------------------

/// Boundary zone names straight from the mesh text.
fn msh_boundary_names(msh: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(msh).unwrap();
    text.lines()
        .filter_map(|l| l.trim().strip_prefix("(45 ("))
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|w| !matches!(w[1], "fluid" | "interior" | "solid"))
        .map(|w| w[2].trim_end_matches([')', '(']).to_string())
        .collect()
}

#[test]
fn conversion_reports_mesh_patches() {
    let dir = tempfile::tempdir().unwrap();
    let report = convert_mesh(&case1_mesh(), dir.path(), &SimulatedExecutor::default()).unwrap();
    let names: Vec<String> = report.patch_names().map(str::to_string).collect();
    assert_eq!(names, msh_boundary_names(&case1_mesh()));
    assert_eq!(names, CASE1_PATCHES);
    assert_eq!(report.cell_count, 2);
    assert_eq!(read_boundary(dir.path()).unwrap(), report.patches);
}

#[test]
fn conversion_fails_without_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let err = convert_mesh(&dir.path().join("none.msh"), dir.path(), &SimulatedExecutor::default()).unwrap_err();
    assert!(matches!(err, RunError::Conversion { .. }));
    let bogus = dir.path().join("bogus.msh");
    std::fs::write(&bogus, "(0 \"nothing here\")\n").unwrap();
    assert!(matches!(convert_mesh(&bogus, dir.path(), &SimulatedExecutor::default()), Err(RunError::Conversion { .. })));
}

#[test]
fn fixture_poly_mesh_is_installed() {
    let dir = tempfile::tempdir().unwrap();
    let exec = SimulatedExecutor::default().with_poly_mesh(&fixture("tutorials/incompressible/simpleFoam/airFoil2D/constant/polyMesh"));
    let report = convert_mesh(&case1_mesh(), dir.path(), &exec).unwrap();
    assert_eq!(report.patch_names().collect::<Vec<_>>(), ["inlet", "outlet", "walls", "frontAndBack"]);
}

#[test]
fn constraint_patch_types_follow_the_specification() {
    let dir = tempfile::tempdir().unwrap();
    convert_mesh(&case1_mesh(), dir.path(), &SimulatedExecutor::default()).unwrap();
    let before: Vec<_> = read_boundary(dir.path()).unwrap().into_iter().map(|p| p.patch_type).collect();
    assert_eq!(before, ["patch", "patch", "wall", "symmetryPlane"]);
    assert_eq!(align_patch_types(dir.path(), &case1_spec()).unwrap(), ["FrontAndBack"]);
    assert_eq!(read_boundary(dir.path()).unwrap()[3].patch_type, "empty");
}

// -- time controls -------------------------------------------------------

fn temporal_for(solver: &str, regime: FlowRegime) -> FoamDictionary {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("system")).unwrap();
    std::fs::write(dir.path().join("system/controlDict"), case1_file_text("system/controlDict")).unwrap();
    let spec = CaseSpecification::new("t", solver, regime);
    let written = configure_temporal(dir.path(), &spec, &RunConfig::default()).unwrap();
    assert_eq!(read_dict(&dir.path().join("system/controlDict")), written);
    written
}

fn num(d: &FoamDictionary, key: &str) -> f64 {
    d.get_f64(key).unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn steady_runs_ten_iterations_writing_every_five() {
    let d = temporal_for("simpleFoam", FlowRegime::Incompressible);
    assert_eq!((num(&d, "endTime"), num(&d, "deltaT"), num(&d, "writeInterval")), (10.0, 1.0, 5.0));
    assert_eq!(d.get_word("writeControl"), Some("timeStep"));
    assert_eq!(d.get_word("application"), Some("simpleFoam"));
    assert!(d.get("maxCo").is_none());
}

#[test]
fn transient_step_depends_on_regime() {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
    let c = temporal_for("rhoCentralFoam", FlowRegime::Compressible);
    assert!(close(num(&c, "deltaT"), 1e-8));
    assert!(close(num(&c, "endTime"), 1e-7));
    assert!(close(num(&c, "writeInterval"), 5e-8));
    assert_eq!(c.get_word("writeControl"), Some("runTime"));
    assert_eq!(num(&c, "maxCo"), 0.6);

    let i = temporal_for("pimpleFoam", FlowRegime::Incompressible);
    assert!(close(num(&i, "deltaT"), 1e-5));
    assert!(close(num(&i, "endTime"), 1e-4));
    assert_eq!(num(&i, "maxCo"), 0.6);

    let ico = temporal_for("icoFoam", FlowRegime::Incompressible);
    assert!(close(num(&ico, "deltaT"), 1e-5));
    assert!(ico.get("maxCo").is_none());
}

#[test]
fn temporal_needs_control_dict() {
    let dir = tempfile::tempdir().unwrap();
    let err = configure_temporal(dir.path(), &case1_spec(), &RunConfig::default()).unwrap_err();
    assert!(matches!(err, RunError::MissingControlDict));
}

// -- loop contracts -----------------------------------------------------

const DIVERGED: &str = "Time = 1\n\n--> FOAM FATAL ERROR: (openfoam-2406)\nMaximum number of iterations exceeded\n\n    From Foam::SIMPLE\n\nFOAM exiting\n";

/// Provider that answers every correction request by supplying the fixed
/// fvSchemes, counting calls per purpose.
fn fixing_provider(calls: Arc<AtomicUsize>) -> impl Fn(&ChatRequest) -> Result<ChatResponse, ProviderFailure> + Send + Sync {
    move |req: &ChatRequest| {
        calls.fetch_add(1, Ordering::SeqCst);
        let text = match req.purpose.as_str() {
            PURPOSE_LOCALIZE => "{\"target_file\": \"system/fvSchemes\"}".to_string(),
            PURPOSE_PROPOSE => "1. Add div(phi,nuTilda) to divSchemes.".to_string(),
            PURPOSE_APPLY | PURPOSE_REWRITE => read_fixture("case1/fvSchemes.corrected"),
            other => return Err(ProviderFailure::Fatal(format!("unexpected {other}"))),
        };
        let usage = match req.role {
            LlmRole::Reasoner => TokenUsage::new(1000, 1000),
            LlmRole::Editor => TokenUsage::new(2000, 0),
        };
        Ok(ChatResponse { text, usage })
    }
}

struct LoopRun {
    outcome: RunOutcome,
    events: Vec<RunEvent>,
    solver_runs: usize,
    work: tempfile::TempDir,
}

fn run_loop(generated: &GeneratedCase, exec: &SimulatedExecutor, gateway: Gateway, config: RunConfig) -> LoopRun {
    let work = tempfile::tempdir().unwrap();
    let kb = KnowledgeBase::default();
    let mut events = Vec::new();
    let outcome = reflect_loop(
        &RunInputs {
            generated,
            mesh: &case1_mesh(),
            work_dir: work.path(),
            kb: &kb,
            gateway: &gateway,
            executor: exec,
            config,
        },
        &mut |e| events.push(e.clone()),
    );
    LoopRun {
        outcome,
        events,
        solver_runs: exec.solver_runs(),
        work,
    }
}

fn fail_then_succeed(k: usize, config: RunConfig) -> LoopRun {
    let exec = SimulatedExecutor::scripted(vec![
        SimRun::Fail {
            log: DIVERGED.into(),
            exit_code: 1
        };
        k
    ])
    .with_fallback(SimRun::Succeed);
    let gw = gateway(FnProvider(fixing_provider(Arc::default())));
    run_loop(&case1_generated(), &exec, gw, config)
}

#[test]
fn reflections_count_failed_runs() {
    for k in [0usize, 1, 5] {
        let r = fail_then_succeed(k, RunConfig::default());
        assert_eq!(r.outcome.status, RunStatus::TenStepSuccess, "k={k}: {:?}", r.outcome.cause);
        assert_eq!(r.outcome.reflections as usize, k);
        assert_eq!(r.solver_runs, k + 1);
        let manifests = std::fs::read_dir(r.work.path().join(MANIFEST_SUBDIR)).map(|d| d.count()).unwrap_or(0);
        assert_eq!(manifests, k);
    }
}

#[test]
fn always_failing_run_is_exhausted() {
    let config = RunConfig {
        max_reflections: 5,
        ..RunConfig::default()
    };
    let exec = SimulatedExecutor::default().with_fallback(SimRun::Fail {
        log: DIVERGED.into(),
        exit_code: 1,
    });
    let r = run_loop(&case1_generated(), &exec, gateway(FnProvider(fixing_provider(Arc::default()))), config);
    assert_eq!(r.outcome.status, RunStatus::Exhausted);
    assert_eq!(r.outcome.reflections, 5);
    assert_eq!(r.solver_runs, 6);
    let corrected = r.events.iter().filter(|e| matches!(e, RunEvent::Corrected { .. })).count();
    assert_eq!(corrected, 5);
    // the third identical failure was escalated
    let cats: Vec<_> = r
        .events
        .iter()
        .filter_map(|e| match e {
            RunEvent::Diagnosed { diagnosis, .. } => Some(diagnosis.category),
            _ => None,
        })
        .collect();
    assert_eq!(cats[2], ErrorCategory::Persistent);
    assert!(matches!(r.events.last(), Some(RunEvent::Finished { .. })));
}

#[test]
fn invalid_config_fails_before_running() {
    let config = RunConfig {
        max_reflections: 0,
        ..RunConfig::default()
    };
    let r = fail_then_succeed(0, config);
    assert_eq!(r.outcome.status, RunStatus::HardFailure);
    assert_eq!(r.solver_runs, 0);
}

#[test]
fn conversion_failure_is_hard() {
    let g = case1_generated();
    let work = tempfile::tempdir().unwrap();
    let kb = KnowledgeBase::default();
    let gw = gateway(FnProvider(fixing_provider(Arc::default())));
    let exec = SimulatedExecutor::default();
    let outcome = reflect_loop(
        &RunInputs {
            generated: &g,
            mesh: &work.path().join("missing.msh"),
            work_dir: work.path(),
            kb: &kb,
            gateway: &gw,
            executor: &exec,
            config: RunConfig::default(),
        },
        &mut |_| {},
    );
    assert_eq!(outcome.status, RunStatus::HardFailure);
    assert!(outcome.cause.unwrap().contains("missing.msh"));
}

#[test]
fn unusable_correction_still_counts() {
    // the editor keeps answering with text that is not a dictionary
    let provider = |req: &ChatRequest| {
        let text = match req.purpose.as_str() {
            PURPOSE_LOCALIZE => "{\"target_file\": \"system/fvSchemes\"}",
            PURPOSE_PROPOSE => "Add the missing term.",
            _ => "divSchemes { default none;",
        };
        Ok(ChatResponse {
            text: text.into(),
            usage: TokenUsage::new(10, 10),
        })
    };
    let config = RunConfig {
        max_reflections: 2,
        ..RunConfig::default()
    };
    let exec = SimulatedExecutor::default().with_fallback(SimRun::Fail {
        log: DIVERGED.into(),
        exit_code: 1,
    });
    let r = run_loop(&case1_generated(), &exec, gateway(FnProvider(provider)), config);
    assert_eq!(r.outcome.status, RunStatus::Exhausted);
    assert_eq!(r.outcome.reflections, 2);
    assert_eq!(r.events.iter().filter(|e| matches!(e, RunEvent::CorrectionFailed { .. })).count(), 2);
}

// -- correction pathways ------------------------------------------------

/// Case 1 deployed with a converted mesh, ready for `correct`.
fn deployed_case1() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    deploy_case(&case1_generated(), &case).unwrap();
    convert_mesh(&case1_mesh(), &case, &SimulatedExecutor::default()).unwrap();
    align_patch_types(&case, &case1_spec()).unwrap();
    dir
}

fn diagnose(case: &Path, spec: &CaseSpecification, gw: &Gateway) -> ErrorDiagnosis {
    let log = lint_case(case, &spec.solver).expect_err("case should fail");
    let run = ToolRun {
        exit_code: Some(1),
        log,
        timed_out: false,
    };
    classify_error(&run, &ErrorHistory::default(), case, spec, gw, 3).unwrap()
}

#[test]
fn general_error_gets_minimal_patch() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    let calls = Arc::new(AtomicUsize::new(0));
    let gw = gateway(FnProvider(fixing_provider(calls.clone())));
    let d = diagnose(&case, &case1_spec(), &gw);
    assert_eq!((d.category, d.target_file.as_deref()), (ErrorCategory::General, Some("system/fvSchemes")));
    assert!(d.evidence.contains("div(phi,nuTilda)"));
    let c = correct(&d, &case, &case1_spec(), &KnowledgeBase::default(), &gw).unwrap();
    assert_eq!(c.patched, ["system/fvSchemes"]);
    assert!(c.advice.unwrap().contains("div(phi,nuTilda)"));
    assert_eq!(lint_case(&case, "simpleFoam"), Ok(()));
    // localize, propose, apply
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    let roles: Vec<_> = gw.log().entries().iter().map(|e| e.role).collect();
    assert_eq!(roles, [LlmRole::Reasoner, LlmRole::Reasoner, LlmRole::Editor]);
}

fn editor_answers(files: Vec<(&'static str, String)>) -> Gateway {
    gateway(FnProvider(move |req: &ChatRequest| {
        let (_, text) = files
            .iter()
            .find(|(purpose, _)| *purpose == req.purpose)
            .ok_or_else(|| ProviderFailure::Fatal(format!("unexpected {}", req.purpose)))?;
        Ok(ChatResponse {
            text: text.clone(),
            usage: TokenUsage::new(500, 500),
        })
    }))
}

#[test]
fn dimension_error_is_fixed_from_the_log() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    let p = case.join("0/p");
    let kinematic = std::fs::read_to_string(&p).unwrap();
    std::fs::write(&p, kinematic.replace("[0 2 -2 0 0 0 0]", "[1 -1 -2 0 0 0 0]")).unwrap();
    let gw = editor_answers(vec![(PURPOSE_FIX_DIMENSIONS, kinematic.clone())]);
    let d = diagnose(&case, &case1_spec(), &gw);
    assert_eq!((d.category, d.target_file.as_deref()), (ErrorCategory::Dimension, Some("0/p")));
    let kb = tutorial_kb();
    correct(&d, &case, &case1_spec(), &kb, &gw).unwrap();
    let fixed = FieldFile::from_dictionary_named(&read_dict(&p), "p").unwrap();
    assert_eq!(fixed.dimensions.0, [0, 2, -2, 0, 0, 0, 0]);
    // the editor saw a reference p from a tutorial
    let log = gw.log();
    assert!(log.entries()[0].messages[0].content.contains("from tutorial"));
}

#[test]
fn missing_field_is_recreated_with_mesh_patches() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    std::fs::remove_file(case.join("0/nut")).unwrap();
    let gw = editor_answers(vec![(PURPOSE_CREATE_FILE, case1_file_text("0/nut"))]);
    let d = diagnose(&case, &case1_spec(), &gw);
    assert_eq!((d.category, d.missing_name.as_deref()), (ErrorCategory::MissingFile, Some("0/nut")));
    correct(&d, &case, &case1_spec(), &tutorial_kb(), &gw).unwrap();
    let nut = FieldFile::from_dictionary_named(&read_dict(&case.join("0/nut")), "nut").unwrap();
    let patches: Vec<_> = nut.patch_names().collect();
    let mut want = CASE1_PATCHES.to_vec();
    want.sort();
    let mut got = patches.clone();
    got.sort();
    assert_eq!(got, want);
    assert_eq!(gw.log().entries()[0].role, LlmRole::Reasoner);
}

#[test]
fn answer_that_changes_a_boundary_type_is_rejected() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    let u = case1_file_text("0/U");
    let drifted = u.replacen("freestreamVelocity", "fixedValue", 1);
    std::fs::write(case.join("0/U"), u.replacen("[0 1 -1 0 0 0 0]", "[0 1 -2 0 0 0 0]", 1)).unwrap();
    let answers = Arc::new(std::sync::Mutex::new(vec![u.clone(), drifted.clone()]));
    let gw = gateway(FnProvider(move |_req: &ChatRequest| {
        let text = answers.lock().unwrap().pop().unwrap();
        Ok(ChatResponse {
            text,
            usage: TokenUsage::new(1, 1),
        })
    }));
    let d = diagnose(&case, &case1_spec(), &gw);
    assert_eq!(d.target_file.as_deref(), Some("0/U"));
    correct(&d, &case, &case1_spec(), &KnowledgeBase::default(), &gw).unwrap();
    assert_eq!(gw.log().len(), 2);
    assert!(gw.log().entries()[1].messages.iter().any(|m| m.content.contains("must be kept")));
    assert!(deployed_violations(&case, &case1_spec()).is_empty());

    // two drifting answers give up without touching the file
    let before = std::fs::read_to_string(case.join("0/U")).unwrap();
    let gw = gateway(FnProvider(move |_req: &ChatRequest| {
        Ok(ChatResponse {
            text: drifted.clone(),
            usage: TokenUsage::new(1, 1),
        })
    }));
    let err = correct(&d, &case, &case1_spec(), &KnowledgeBase::default(), &gw).unwrap_err();
    assert!(matches!(err, RunError::Correction(_)));
    assert_eq!(std::fs::read_to_string(case.join("0/U")).unwrap(), before);
}

#[test]
fn timeout_is_general() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    let gw = gateway(FnProvider(fixing_provider(Arc::default())));
    let run = ToolRun {
        exit_code: None,
        log: "Time = 1\n".repeat(100),
        timed_out: true,
    };
    let d = classify_error(&run, &ErrorHistory::default(), &case, &case1_spec(), &gw, 3).unwrap();
    assert_eq!(d.category, ErrorCategory::General);
    assert_eq!(d.evidence.lines().count(), 30);
}

#[test]
fn localisation_outside_the_case_is_a_classification_error() {
    let dir = deployed_case1();
    let case = dir.path().join("case");
    let gw = gateway(FnProvider(|_req: &ChatRequest| {
        Ok(ChatResponse {
            text: "{\"target_file\": \"system/blockMeshDict\"}".into(),
            usage: TokenUsage::new(1, 1),
        })
    }));
    let run = ToolRun {
        exit_code: Some(1),
        log: DIVERGED.into(),
        timed_out: false,
    };
    let err = classify_error(&run, &ErrorHistory::default(), &case, &case1_spec(), &gw, 3).unwrap_err();
    assert!(matches!(err, RunError::Classification(_)), "{err:?}");
    assert_eq!(gw.log().len(), 2);
}

// -- end to end ---------------------------------------------------------

fn case1_dry_run() -> (RunOutcome, tempfile::TempDir, Vec<RunEvent>) {
    let steps = script_steps(&[
        "extract-boundaries",
        "extract-fields",
        "extract-properties",
        "generate-files",
        "localize-error",
        "propose-correction",
        "apply-correction",
    ]);
    let (gw, mock) = mock_gateway(steps);
    let kb = tutorial_kb();
    let segments: Vec<_> = segment_document(&case1_document()).into_iter().filter(|s| s.label.starts_with("1 ")).collect();
    let generated = build_case("Case 1", &segments, &kb, &gw).unwrap();
    assert_eq!(generated.spec.time_mode, TimeMode::Steady);
    let exec = SimulatedExecutor::default();
    let r = run_loop(&generated, &exec, gw, RunConfig::default());
    assert_eq!(mock.remaining(), 0);
    (r.outcome, r.work, r.events)
}

#[test]
fn case1_dry_run_reaches_ten_steps() {
    let started = std::time::Instant::now();
    let (outcome, work, events) = case1_dry_run();
    assert_eq!(outcome.status, RunStatus::TenStepSuccess, "{:?}", outcome.cause);
    assert_eq!(outcome.reflections, 1);
    let case = work.path().join(CASE_SUBDIR);
    for t in ["0", "5", "10"] {
        assert!(case.join(t).is_dir(), "{t}");
    }
    assert!(deployed_violations(&case, &case1_spec()).is_empty());

    let qa = QaLog::read_jsonl(&work.path().join(QA_LOG_FILE)).unwrap();
    assert_eq!(qa.len(), 7);
    // price each exchange by hand: $ per thousand tokens
    let rate = |role: LlmRole| match role {
        LlmRole::Reasoner => (0.00055, 0.0022),
        LlmRole::Editor => (0.00021, 0.00082),
    };
    let by_hand: f64 = qa
        .iter()
        .map(|e| {
            let (i, o) = rate(e.role);
            (e.usage.input_tokens as f64 * i + e.usage.output_tokens as f64 * o) / 1000.0
        })
        .sum();
    let reported: f64 = outcome.cost_usd.0.to_string().parse().unwrap();
    assert!(reported > 0.0);
    assert!((reported - by_hand).abs() < 1e-9, "{reported} vs {by_hand}");

    let kinds: Vec<&str> = events
        .iter()
        .map(|e| match e {
            RunEvent::Deployed { .. } => "deployed",
            RunEvent::MeshConverted { .. } => "mesh",
            RunEvent::TemporalConfigured => "temporal",
            RunEvent::ExecutionFinished { .. } => "executed",
            RunEvent::Diagnosed { .. } => "diagnosed",
            RunEvent::Corrected { .. } => "corrected",
            RunEvent::CorrectionFailed { .. } => "correction-failed",
            RunEvent::Finished { .. } => "finished",
        })
        .collect();
    assert_eq!(kinds, ["deployed", "mesh", "temporal", "executed", "diagnosed", "corrected", "executed", "finished"]);
    assert!(std::fs::read_to_string(case.join(CASE_LOG)).unwrap().contains("End"));
    assert!(started.elapsed().as_secs() < 30);
}
