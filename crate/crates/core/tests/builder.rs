mod common;

use common::*;
use foamagent::builder::{
    derive_file_list, extract_case_spec, generate_files, spec_violations, BoundarySpec, BuildError, CaseSpecification,
    TimeMode, PURPOSE_BOUNDARIES, PURPOSE_GENERATE, PURPOSE_REGENERATE,
};
use foamagent::foam::{DimensionVector, FieldFile, FlowRegime};
use foamagent::kb::{KbError, KnowledgeBase, RequiredFileSet};
use foamagent::llm::MockStep;
use foamagent::retrieval::{segment_document, ReferenceBundle, Segment};

fn case1_segments() -> Vec<Segment> {
    segment_document(&case1_document())
        .into_iter()
        .filter(|s| s.label.starts_with("1 "))
        .collect()
}

fn extraction_steps() -> Vec<MockStep> {
    script_steps(&["extract-boundaries", "extract-fields", "extract-properties"])
}

#[test]
fn case1_specification_from_document() {
    let (gw, mock) = mock_gateway(extraction_steps());
    let spec = extract_case_spec("Case 1", &case1_segments(), &gw, &KnowledgeBase::default()).unwrap();
    assert_eq!(mock.remaining(), 0);
    assert_eq!(gw.log().len(), 3);

    let want = case1_spec();
    assert_eq!(spec.solver, "simpleFoam");
    assert_eq!(spec.turbulence_model.as_deref(), Some("SpalartAllmaras"));
    assert_eq!(spec.thermo_model, None);
    assert_eq!(spec.flow_regime, FlowRegime::Incompressible);
    assert_eq!(spec.time_mode, TimeMode::Steady);
    for (patch, b) in &want.boundaries {
        let got = &spec.boundaries[patch];
        assert_eq!(got.bc_type, b.bc_type, "{patch}");
        assert_eq!(got.field_types, b.field_types, "{patch}");
    }
    assert_eq!(spec.patch_names(), want.patch_names());
    assert_eq!(spec.initial_fields["U"], "uniform (25.6 4.51 0)");
    assert_eq!(spec.boundaries["Airfoil"].values["nuTilda"], "uniform 0");
    assert_eq!(spec.properties["nu"], "1e-05");
}

#[test]
fn malformed_answer_is_asked_again_once() {
    let mut steps = vec![MockStep::reply("I think the solver is simpleFoam.").purpose(PURPOSE_BOUNDARIES)];
    steps.extend(extraction_steps());
    let (gw, _) = mock_gateway(steps);
    let spec = extract_case_spec("Case 1", &case1_segments(), &gw, &KnowledgeBase::default()).unwrap();
    assert_eq!(spec.solver, "simpleFoam");
    let log = gw.log();
    let boundary_calls = log.entries().iter().filter(|e| e.purpose == PURPOSE_BOUNDARIES).count();
    assert_eq!(boundary_calls, 2);
    // the re-ask carries the rejected answer and the reason
    let second = &log.entries()[1];
    assert!(second.messages.iter().any(|m| m.content.contains("could not be used")));
}

#[test]
fn twice_malformed_is_an_extraction_error() {
    let (gw, _) = mock_gateway(vec![MockStep::reply("no idea"), MockStep::reply("{\"solver\": 3}")]);
    let err = extract_case_spec("Case 1", &case1_segments(), &gw, &KnowledgeBase::default()).unwrap_err();
    assert!(matches!(err, BuildError::Extraction(_)), "{err:?}");
    assert_eq!(gw.log().len(), 2);
}

#[test]
fn unknown_boundary_type_is_rejected() {
    let bad = r#"{"solver": "simpleFoam", "turbulence_model": null, "boundaries": {"in": {"type": "magicInlet"}}}"#;
    let (gw, _) = mock_gateway(vec![MockStep::reply(bad), MockStep::reply(bad)]);
    let err = extract_case_spec("Case 1", &case1_segments(), &gw, &KnowledgeBase::default()).unwrap_err();
    match err {
        BuildError::Extraction(m) => assert!(m.contains("magicInlet"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_document_makes_no_calls() {
    let (gw, _) = mock_gateway(vec![]);
    let err = extract_case_spec("Case 1", &[Segment::new("x", "  ")], &gw, &KnowledgeBase::default()).unwrap_err();
    assert!(matches!(err, BuildError::Extraction(_)));
    assert!(gw.log().is_empty());
}

fn case5_spec() -> CaseSpecification {
    let mut s = CaseSpecification::new("Case 5", "rhoCentralFoam", FlowRegime::Compressible);
    s.turbulence_model = Some("SpalartAllmaras".into());
    s.thermo_model = Some("hePsiThermo".into());
    let patch = |types: [(&str, &str); 6]| {
        types
            .iter()
            .fold(BoundarySpec::default(), |b, (f, t)| b.with_field(f, t))
    };
    s.boundaries.insert(
        "Inlet".into(),
        patch([
            ("p", "totalPressure"),
            ("U", "pressureInletOutletVelocity"),
            ("T", "totalTemperature"),
            ("nut", "calculated"),
            ("nuTilda", "fixedValue"),
            ("alphat", "calculated"),
        ]),
    );
    s.boundaries.insert(
        "Outlet".into(),
        patch([
            ("p", "fixedValue"),
            ("U", "zeroGradient"),
            ("T", "zeroGradient"),
            ("nut", "calculated"),
            ("nuTilda", "inletOutlet"),
            ("alphat", "calculated"),
        ]),
    );
    s.boundaries.insert(
        "Walls".into(),
        patch([
            ("p", "zeroGradient"),
            ("U", "noSlip"),
            ("T", "zeroGradient"),
            ("nut", "nutUSpaldingWallFunction"),
            ("nuTilda", "fixedValue"),
            ("alphat", "compressible::alphatWallFunction"),
        ]),
    );
    s.boundaries.insert("FrontAndBack".into(), BoundarySpec::patch_type("empty"));
    s
}

#[test]
fn file_lists_follow_solver_and_models() {
    let kb = KnowledgeBase::default();
    let c1 = derive_file_list(&case1_spec(), &kb).unwrap();
    assert_eq!(c1, RequiredFileSet::from_paths(CASE1_PATHS).unwrap());

    let c5 = derive_file_list(&case5_spec(), &kb).unwrap();
    assert_eq!(c5.len(), 12);
    for p in ["0/T", "0/alphat", "constant/thermodynamicProperties"] {
        assert!(c5.contains(p), "{p}");
    }

    let mut odd = case1_spec();
    odd.solver = "notAFoam".into();
    assert!(matches!(derive_file_list(&odd, &kb), Err(BuildError::Kb(KbError::UnknownSolver(_)))));
}

fn dims_of(case: &foamagent::builder::GeneratedCase, path: &str) -> DimensionVector {
    let field = path.strip_prefix("0/").unwrap();
    FieldFile::from_dictionary_named(&case.files[path], field).unwrap().dimensions
}

#[test]
fn case1_generation_yields_nine_consistent_files() {
    let spec = case1_spec();
    let list = derive_file_list(&spec, &KnowledgeBase::default()).unwrap();
    let (gw, _) = mock_gateway(script_steps(&["generate-files"]));
    let case = generate_files(&spec, &list, &ReferenceBundle::default(), &gw).unwrap();
    assert_eq!(case.paths().collect::<Vec<_>>().len(), 9);
    assert_eq!(dims_of(&case, "0/p"), DimensionVector([0, 2, -2, 0, 0, 0, 0]));
    assert!(spec_violations(&spec, case.files.iter().map(|(p, d)| (p.as_str(), d))).is_empty());
    let header = case.files["0/U"].header().unwrap().unwrap();
    assert_eq!((header.class.as_str(), header.object.as_str()), ("volVectorField", "U"));
    assert_eq!(gw.log().len(), 1);
}

#[test]
fn case5_generation_uses_thermodynamic_pressure() {
    let spec = case5_spec();
    let list = derive_file_list(&spec, &KnowledgeBase::default()).unwrap();
    let (gw, _) = mock_gateway(vec![MockStep::reply(read_fixture("case5/generated.txt")).purpose(PURPOSE_GENERATE)]);
    let case = generate_files(&spec, &list, &ReferenceBundle::default(), &gw).unwrap();
    assert_eq!(case.files.len(), 12);
    // the answer carried kinematic units; the regime table wins
    assert_eq!(dims_of(&case, "0/p"), DimensionVector([1, -1, -2, 0, 0, 0, 0]));
    assert_eq!(dims_of(&case, "0/alphat"), DimensionVector([1, -1, -1, 0, 0, 0, 0]));
    assert!(case.files.contains_key("constant/thermodynamicProperties"));
}

fn envelope_with_renamed_patch() -> String {
    let step = &script_steps(&["generate-files"])[0];
    step.response.replacen("    Airfoil\n    {\n        type            noSlip;", "    Wing\n    {\n        type            noSlip;", 1)
}

#[test]
fn bad_file_is_regenerated_once() {
    let spec = case1_spec();
    let list = derive_file_list(&spec, &KnowledgeBase::default()).unwrap();
    let good_u = format!("== FILE: 0/U ==\n{}", case1_file_text("0/U"));
    let (gw, _) = mock_gateway(vec![
        MockStep::reply(envelope_with_renamed_patch()).purpose(PURPOSE_GENERATE),
        MockStep::reply(good_u).purpose(PURPOSE_REGENERATE).containing("0/U"),
    ]);
    let case = generate_files(&spec, &list, &ReferenceBundle::default(), &gw).unwrap();
    assert_eq!(case.files.len(), 9);
    assert_eq!(gw.log().len(), 2);
}

#[test]
fn persistent_bad_file_is_a_generation_error() {
    let spec = case1_spec();
    let list = derive_file_list(&spec, &KnowledgeBase::default()).unwrap();
    let bad = envelope_with_renamed_patch();
    let (gw, _) = mock_gateway(vec![MockStep::reply(bad.clone()), MockStep::reply(bad)]);
    match generate_files(&spec, &list, &ReferenceBundle::default(), &gw) {
        Err(BuildError::Generation(m)) => assert!(m.contains("0/U"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(gw.log().len(), 2);
}
