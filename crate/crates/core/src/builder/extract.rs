use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::catalog::catalog;
use super::spec::{BoundarySpec, CaseSpecification, TimeMode};
use super::{derive_file_list, BuildError};
use crate::foam::FlowRegime;
use crate::kb::{KnowledgeBase, COMPRESSIBLE_SOLVERS, INCOMPRESSIBLE_SOLVERS};
use crate::llm::{extract_answer, Gateway, LlmRole, Message};
use crate::retrieval::{filter_segments, Segment, DEFAULT_SEGMENT_THRESHOLD};

pub const PURPOSE_BOUNDARIES: &str = "extract-boundaries";
pub const PURPOSE_FIELDS: &str = "extract-fields";
pub const PURPOSE_PROPERTIES: &str = "extract-properties";

/// First JSON object in a model answer, after marker and fence stripping.
pub fn parse_json_answer<T: DeserializeOwned>(response: &str) -> Result<T, String> {
    let answer = extract_answer(response);
    let start = answer.find('{').ok_or("no JSON object in answer")?;
    let end = answer.rfind('}').ok_or("unterminated JSON object")?;
    if end < start {
        return Err("unterminated JSON object".into());
    }
    serde_json::from_str(&answer[start..=end]).map_err(|e| format!("invalid JSON: {e}"))
}

/// One exchange, plus one re-ask carrying the validation error when the
/// answer does not parse or validate.
pub(crate) fn ask_structured<T, F>(
    gateway: &Gateway,
    role: LlmRole,
    purpose: &str,
    prompt: String,
    validate: F,
) -> Result<T, StructuredError>
where
    T: DeserializeOwned,
    F: Fn(T) -> Result<T, String>,
{
    let mut messages = vec![Message::system(SYSTEM_PROMPT), Message::user(prompt)];
    let mut last_err = String::new();
    for attempt in 0..2 {
        let (text, _) = gateway.complete(role, purpose, messages.clone()).map_err(StructuredError::Llm)?;
        match parse_json_answer::<T>(&text).and_then(&validate) {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!("{purpose}: malformed answer (attempt {}): {e}", attempt + 1);
                last_err = e.clone();
                messages.push(Message::assistant(text));
                messages.push(Message::user(format!(
                    "Your answer could not be used: {e}. Reply again with only the JSON object in the requested format."
                )));
            }
        }
    }
    Err(StructuredError::Invalid(last_err))
}

pub(crate) enum StructuredError {
    Llm(crate::llm::LlmError),
    Invalid(String),
}

impl StructuredError {
    fn extraction(self) -> BuildError {
        match self {
            StructuredError::Llm(e) => BuildError::Llm(e),
            StructuredError::Invalid(m) => BuildError::Extraction(m),
        }
    }
}

const SYSTEM_PROMPT: &str = "You are an OpenFOAM v2406 case-setup assistant. Answer precisely in the requested format.";

#[derive(Debug, Deserialize)]
struct BoundaryAnswer {
    solver: String,
    #[serde(default)]
    turbulence_model: Option<String>,
    #[serde(default)]
    thermo_model: Option<String>,
    #[serde(default)]
    flow_regime: Option<FlowRegime>,
    boundaries: BTreeMap<String, BoundarySpec>,
}

#[derive(Debug, Deserialize)]
struct FieldAnswer {
    initial_fields: BTreeMap<String, Value>,
    #[serde(default)]
    boundary_values: BTreeMap<String, BTreeMap<String, Value>>,
}

#[derive(Debug, Deserialize)]
struct PropertyAnswer {
    properties: BTreeMap<String, Value>,
}

fn literal(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        other => other.to_string(),
    }
}

fn document_text(segments: &[Segment]) -> String {
    segments
        .iter()
        .map(|s| format!("[{}]\n{}", s.label, s.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn regime_for(solver: &str, thermo: Option<&str>, declared: Option<FlowRegime>) -> FlowRegime {
    if thermo.is_some() || COMPRESSIBLE_SOLVERS.contains(&solver) {
        FlowRegime::Compressible
    } else if INCOMPRESSIBLE_SOLVERS.contains(&solver) {
        FlowRegime::Incompressible
    } else {
        declared.unwrap_or(FlowRegime::Unknown)
    }
}

/// Replaces near-miss type spellings with their catalog form; rejects
/// names with no close catalog entry.
fn canonicalize_types(boundaries: &mut BTreeMap<String, BoundarySpec>) -> Result<(), String> {
    let cat = catalog();
    let fix = |t: &mut String, patch: &str| -> Result<(), String> {
        if cat.contains(t) {
            return Ok(());
        }
        match cat.suggest(t) {
            Some(s) => {
                log::info!("patch {patch}: boundary type '{t}' corrected to '{s}'");
                *t = s.to_string();
                Ok(())
            }
            None => Err(format!("patch '{patch}': '{t}' is not an OpenFOAM boundary type")),
        }
    };
    for (patch, b) in boundaries.iter_mut() {
        if let Some(t) = b.bc_type.as_mut() {
            fix(t, patch)?;
        }
        for t in b.field_types.values_mut() {
            fix(t, patch)?;
        }
        if b.bc_type.is_none() && b.field_types.is_empty() {
            return Err(format!("patch '{patch}' has no boundary type"));
        }
    }
    Ok(())
}

/// Three-step extraction of a case specification from document segments:
/// solver, models and boundary types; field values; physical properties.
pub fn extract_case_spec(
    name: &str,
    document: &[Segment],
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<CaseSpecification, BuildError> {
    if document.iter().all(|s| s.text.trim().is_empty()) {
        return Err(BuildError::Extraction("document is empty".into()));
    }
    let full_text = document_text(document);
    let catalog_names = catalog().names().collect::<Vec<_>>().join(", ");

    let prompt = format!(
        "From the case description below, identify {name}: its OpenFOAM solver, turbulence model \
         (null for laminar), thermophysical model (null for incompressible), and every boundary patch \
         with its boundary condition type. Boundary types must be spelled exactly as in this OpenFOAM v2406 \
         list: {catalog_names}.\n\
         Answer with a JSON object: {{\"solver\": str, \"turbulence_model\": str|null, \"thermo_model\": str|null, \
         \"boundaries\": {{<patch>: {{\"type\": str, \"field_types\": {{<field>: str}}}}}}}}.\n\n{full_text}"
    );
    let step1: BoundaryAnswer = ask_structured(gateway, LlmRole::Reasoner, PURPOSE_BOUNDARIES, prompt, |mut a: BoundaryAnswer| {
        if a.boundaries.is_empty() {
            return Err("no boundary patches".into());
        }
        canonicalize_types(&mut a.boundaries)?;
        kb.required_files(&a.solver, a.turbulence_model.as_deref(), a.thermo_model.as_deref())
            .map_err(|e| e.to_string())?;
        Ok(a)
    })
    .map_err(StructuredError::extraction)?;

    let model = step1.turbulence_model.filter(|m| !m.eq_ignore_ascii_case("laminar"));
    let mut spec = CaseSpecification {
        name: name.to_string(),
        flow_regime: regime_for(&step1.solver, step1.thermo_model.as_deref(), step1.flow_regime),
        time_mode: TimeMode::for_solver(&step1.solver),
        solver: step1.solver,
        turbulence_model: model,
        thermo_model: step1.thermo_model,
        boundaries: step1.boundaries,
        initial_fields: BTreeMap::new(),
        properties: BTreeMap::new(),
        free_text: full_text.clone(),
        source_ref: name.to_string(),
    };
    spec.check().map_err(BuildError::Extraction)?;

    // later steps only see the sections relevant to the identified setup
    let relevant = match filter_segments(document, &spec, DEFAULT_SEGMENT_THRESHOLD) {
        Ok(s) if !s.is_empty() => document_text(&s),
        _ => full_text,
    };
    let files = derive_file_list(&spec, kb)?;
    let fields: Vec<String> = files
        .iter()
        .filter_map(|p| p.strip_prefix("0/"))
        .map(str::to_string)
        .collect();
    let patches: Vec<&str> = spec.boundaries.keys().map(String::as_str).collect();

    let prompt = format!(
        "Solver {}, turbulence model {}, patches {:?}. For every field in {:?} give the initial internal \
         value as an OpenFOAM literal (e.g. \"uniform 0\", \"uniform (1 0 0)\"), and the value of each field on \
         each patch where the description fixes one.\n\
         Answer with a JSON object: {{\"initial_fields\": {{<field>: str}}, \
         \"boundary_values\": {{<patch>: {{<field>: str}}}}}}.\n\n{relevant}",
        spec.solver,
        spec.turbulence_model.as_deref().unwrap_or("none"),
        patches,
        fields
    );
    let known: Vec<&str> = patches.clone();
    let step2: FieldAnswer = ask_structured(gateway, LlmRole::Reasoner, PURPOSE_FIELDS, prompt, |a: FieldAnswer| {
        if let Some(f) = fields.iter().find(|f| !a.initial_fields.contains_key(*f)) {
            return Err(format!("missing initial value for field '{f}'"));
        }
        if let Some(p) = a.boundary_values.keys().find(|p| !known.contains(&p.as_str())) {
            return Err(format!("unknown patch '{p}' in boundary_values"));
        }
        Ok(a)
    })
    .map_err(StructuredError::extraction)?;
    spec.initial_fields = step2.initial_fields.iter().map(|(k, v)| (k.clone(), literal(v))).collect();
    for (patch, vals) in step2.boundary_values {
        let b = spec.boundaries.get_mut(&patch).expect("validated above");
        for (field, v) in vals {
            b.values.insert(field, literal(&v));
        }
    }

    let prompt = format!(
        "List the physical properties and reference quantities the description gives for this {} case \
         (for example kinematic viscosity nu, freestream velocity, Mach number, temperature), each as a \
         plain number or OpenFOAM literal.\n\
         Answer with a JSON object: {{\"properties\": {{<name>: str}}}}.\n\n{relevant}",
        spec.solver
    );
    let step3: PropertyAnswer = ask_structured(gateway, LlmRole::Reasoner, PURPOSE_PROPERTIES, prompt, Ok)
        .map_err(StructuredError::extraction)?;
    spec.properties = step3.properties.iter().map(|(k, v)| (k.clone(), literal(v))).collect();
    Ok(spec)
}
