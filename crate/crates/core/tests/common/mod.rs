//! Fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod corpus;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use foamagent::builder::{BoundarySpec, CaseSpecification, GeneratedCase};
use foamagent::foam::{parse_dictionary, FlowRegime};
use foamagent::kb::{ingest_tree, KnowledgeBase};
use foamagent::llm::{ChatProvider, Gateway, MockProvider, MockStep, RetryPolicy};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub const CASE1_PATHS: [&str; 9] = [
    "0/p",
    "0/U",
    "0/nut",
    "0/nuTilda",
    "constant/transportProperties",
    "constant/turbulenceProperties",
    "system/controlDict",
    "system/fvSchemes",
    "system/fvSolution",
];

pub const CASE1_PATCHES: [&str; 4] = ["Inlet", "Outlet", "Airfoil", "FrontAndBack"];

pub fn tutorial_kb() -> KnowledgeBase {
    ingest_tree(&fixture("tutorials")).expect("fixture tree ingests")
}

pub fn case1_mesh() -> PathBuf {
    fixture("case1/airfoil.msh")
}

pub fn case1_document() -> String {
    read_fixture("case1/document.md")
}

pub fn case1_script() -> Vec<MockStep> {
    serde_json::from_str(&read_fixture("case1/mock_script.json")).expect("script parses")
}

/// Script steps with the given purpose, in order.
pub fn script_steps(purposes: &[&str]) -> Vec<MockStep> {
    let all = case1_script();
    purposes
        .iter()
        .map(|p| {
            all.iter()
                .find(|s| s.purpose.as_deref() == Some(*p))
                .unwrap_or_else(|| panic!("no step {p}"))
                .clone()
        })
        .collect()
}

/// The Case 1 specification as extraction should produce it.
pub fn case1_spec() -> CaseSpecification {
    let mut s = CaseSpecification::new("Case 1", "simpleFoam", FlowRegime::Incompressible);
    s.turbulence_model = Some("SpalartAllmaras".into());
    let far = || {
        BoundarySpec::patch_type("freestream")
            .with_field("U", "freestreamVelocity")
            .with_field("p", "freestreamPressure")
    };
    s.boundaries.insert("Inlet".into(), far());
    s.boundaries.insert("Outlet".into(), far());
    s.boundaries.insert(
        "Airfoil".into(),
        BoundarySpec::default()
            .with_field("U", "noSlip")
            .with_field("p", "zeroGradient")
            .with_field("nut", "nutUSpaldingWallFunction")
            .with_field("nuTilda", "fixedValue"),
    );
    s.boundaries.insert("FrontAndBack".into(), BoundarySpec::patch_type("empty"));
    s
}

pub fn case1_file_text(path: &str) -> String {
    let name = path.rsplit('/').next().unwrap();
    read_fixture(&format!("case1/files/{name}"))
}

/// The nine Case 1 files as generation hands them over.
pub fn case1_generated() -> GeneratedCase {
    let files: BTreeMap<_, _> = CASE1_PATHS
        .iter()
        .map(|p| (p.to_string(), parse_dictionary(&case1_file_text(p)).expect("fixture parses")))
        .collect();
    GeneratedCase { files, spec: case1_spec() }
}

pub fn gateway(provider: impl ChatProvider + 'static) -> Gateway {
    Gateway::new(Arc::new(provider)).with_retry(RetryPolicy::immediate(3))
}

pub fn mock_gateway(steps: Vec<MockStep>) -> (Gateway, Arc<MockProvider>) {
    let mock = Arc::new(MockProvider::new(steps));
    let gw = Gateway::new(mock.clone()).with_retry(RetryPolicy::immediate(3));
    (gw, mock)
}

/// Writable copy of a tutorial case. Tutorials shipped without a polyMesh
/// get a boundary file listing the patches of their `0/p`.
pub fn tutorial_case(rel: &str) -> tempfile::TempDir {
    use foamagent::builder::catalog;
    use foamagent::foam::FieldFile;
    use foamagent::runner::{write_boundary, BoundaryPatch};

    let src = fixture("tutorials").join(rel);
    let dir = tempfile::tempdir().unwrap();
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let to = dir.path().join(entry.path().strip_prefix(&src).unwrap());
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&to).unwrap();
        } else {
            std::fs::copy(entry.path(), &to).unwrap();
        }
    }
    if !dir.path().join("constant/polyMesh/boundary").exists() {
        let text = std::fs::read_to_string(dir.path().join("0/p")).unwrap();
        let field = FieldFile::from_dictionary_named(&parse_dictionary(&text).unwrap(), "p").unwrap();
        let cat = catalog();
        let patches: Vec<BoundaryPatch> = field
            .patch_names()
            .enumerate()
            .map(|(i, name)| {
                let t = field.patch_type(name).unwrap_or("patch");
                let patch_type = if cat.is_constraint(t) {
                    t
                } else if name.to_lowercase().contains("wall") {
                    "wall"
                } else {
                    "patch"
                };
                BoundaryPatch {
                    name: name.to_string(),
                    patch_type: patch_type.to_string(),
                    n_faces: 1,
                    start_face: 10 + i,
                }
            })
            .collect();
        write_boundary(dir.path(), &patches).unwrap();
    }
    dir
}

/// Provider answering every request with the Case 1 script step of the
/// same purpose, so any number of sessions can share it.
pub fn purpose_provider() -> foamagent::llm::FnProvider<impl Fn(&foamagent::llm::ChatRequest) -> Result<foamagent::llm::ChatResponse, foamagent::llm::ProviderFailure> + Send + Sync> {
    let steps = case1_script();
    foamagent::llm::FnProvider(move |req: &foamagent::llm::ChatRequest| {
        steps
            .iter()
            .find(|s| s.purpose.as_deref() == Some(req.purpose.as_str()))
            .map(|s| foamagent::llm::ChatResponse {
                text: s.response.clone(),
                usage: s.usage,
            })
            .ok_or_else(|| foamagent::llm::ProviderFailure::Fatal(format!("no scripted answer for {}", req.purpose)))
    })
}

pub fn session_service(root: &std::path::Path, provider: impl ChatProvider + 'static) -> Arc<foamagent::session::SessionService> {
    Arc::new(foamagent::session::SessionService::new(
        root,
        Arc::new(tutorial_kb()),
        gateway(provider),
        Arc::new(foamagent::runner::SimulatedExecutor::default()),
        foamagent::runner::RunConfig::default(),
    ))
}
