//! Case construction: specification types, boundary-type catalog,
//! LLM-driven extraction and file generation.

mod catalog;
mod extract;
mod generate;
mod spec;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foam::{FlowRegime, FoamDictionary};
use crate::kb::{KbError, KnowledgeBase, RequiredFileSet};
use crate::llm::{Gateway, LlmError};
use crate::retrieval::{retrieve_references, ReferenceBundle, Segment};

pub use catalog::{catalog, BoundaryCatalog, FieldClass};
pub use extract::{extract_case_spec, parse_json_answer, PURPOSE_BOUNDARIES, PURPOSE_FIELDS, PURPOSE_PROPERTIES};
pub(crate) use extract::{ask_structured, StructuredError};
pub use generate::{generate_files, parse_file_envelope, PURPOSE_GENERATE, PURPOSE_REGENERATE};
pub use spec::{
    spec_violations, validate_boundaries, BoundarySpec, CaseSpecification, NearMiss, SpecViolation, TimeMode,
    ValidationReport,
};

/// Thermophysical model assumed for a compressible case that names none.
pub const DEFAULT_THERMO: &str = "hePsiThermo";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCase {
    pub files: BTreeMap<String, FoamDictionary>,
    pub spec: CaseSpecification,
}

impl GeneratedCase {
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }
}

/// Files the case needs: solver, turbulence-model and thermo requirements.
pub fn derive_file_list(spec: &CaseSpecification, kb: &KnowledgeBase) -> Result<RequiredFileSet, BuildError> {
    let thermo = match (&spec.thermo_model, spec.flow_regime) {
        (Some(t), _) => Some(t.as_str()),
        (None, FlowRegime::Compressible) => Some(DEFAULT_THERMO),
        (None, _) => None,
    };
    Ok(kb.required_files(&spec.solver, spec.turbulence_model.as_deref(), thermo)?)
}

/// Best reference per required file, as handed to generation.
pub fn collect_references(spec: &CaseSpecification, list: &RequiredFileSet, kb: &KnowledgeBase) -> ReferenceBundle {
    let mut bundle = ReferenceBundle::default();
    for path in list.iter() {
        match retrieve_references(kb, spec, path, 1) {
            Ok(r) => bundle.items.extend(r.items),
            Err(e) => log::debug!("no reference for {path}: {e}"),
        }
    }
    bundle
}

/// Document segments to generated case files for one selected case.
pub fn build_case(label: &str, segments: &[Segment], kb: &KnowledgeBase, gateway: &Gateway) -> Result<GeneratedCase, BuildError> {
    let spec = extract_case_spec(label, segments, gateway, kb)?;
    let list = derive_file_list(&spec, kb)?;
    let refs = collect_references(&spec, &list, kb);
    generate_files(&spec, &list, &refs, gateway)
}
