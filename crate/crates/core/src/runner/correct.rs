use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::deploy::write_file;
use super::mesh::read_boundary;
use super::{ErrorCategory, ErrorDiagnosis, RunError};
use crate::builder::{parse_file_envelope, spec_violations, CaseSpecification};
use crate::foam::{parse_dictionary, serialize_dictionary, FieldFile, FoamDictionary, FoamHeader};
use crate::kb::KnowledgeBase;
use crate::llm::{extract_answer, wrap_thought, Gateway, LlmRole, Message};
use crate::retrieval::{build_context, retrieve_references, ReferenceBundle, DEFAULT_REFERENCE_COUNT};

pub const PURPOSE_FIX_DIMENSIONS: &str = "fix-dimensions";
pub const PURPOSE_CREATE_FILE: &str = "create-missing-file";
pub const PURPOSE_REWRITE: &str = "rewrite-file";
pub const PURPOSE_PROPOSE: &str = "propose-correction";
pub const PURPOSE_APPLY: &str = "apply-correction";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub category: ErrorCategory,
    pub patched: Vec<String>,
    /// Step-by-step advice, for General corrections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advice: Option<String>,
}

fn references(kb: &KnowledgeBase, spec: &CaseSpecification, target: &str) -> ReferenceBundle {
    retrieve_references(kb, spec, target, DEFAULT_REFERENCE_COUNT).unwrap_or_default()
}

fn references_text(refs: &ReferenceBundle) -> String {
    if refs.is_empty() {
        return "(no reference tutorial has this file)".into();
    }
    refs.items
        .iter()
        .map(|r| format!("-- {} from tutorial {} --\n{}", r.path, r.case_id, serialize_dictionary(&r.content)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Why a patched file cannot be accepted, if it cannot.
fn check_patched(path: &str, d: &FoamDictionary, spec: &CaseSpecification, mesh: &BTreeSet<String>) -> Result<(), String> {
    if let Some(field) = path.strip_prefix("0/") {
        let ff = FieldFile::from_dictionary_named(d, field).map_err(|e| e.to_string())?;
        let patches: BTreeSet<String> = ff.patch_names().map(str::to_string).collect();
        if !mesh.is_empty() && patches != *mesh {
            let missing: Vec<_> = mesh.difference(&patches).collect();
            let extra: Vec<_> = patches.difference(mesh).collect();
            return Err(format!(
                "boundaryField must have exactly the mesh patches; missing {missing:?}, unexpected {extra:?}"
            ));
        }
    }
    let violations = spec_violations(spec, std::iter::once((path, d)));
    if !violations.is_empty() {
        let text = violations.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join("; ");
        return Err(format!("boundary conditions from the case specification must be kept: {text}"));
    }
    Ok(())
}

/// File text from an answer: either bare dictionary text or a single
/// `== FILE: ==` block for the expected path.
fn answer_file(answer: &str, path: &str) -> Result<FoamDictionary, String> {
    let body = extract_answer(answer);
    let text = if body.trim_start().starts_with("== FILE:") {
        parse_file_envelope(&body)?
            .into_iter()
            .find(|(p, _)| p == path)
            .map(|(_, t)| t)
            .ok_or_else(|| format!("answer has no block for {path}"))?
    } else {
        body
    };
    parse_dictionary(&text).map_err(|e| format!("the file does not parse: {e}"))
}

/// Asks for a whole file, re-asking once with the problem when the answer
/// does not parse or breaks the specification.
fn ask_file(
    gateway: &Gateway,
    role: LlmRole,
    purpose: &str,
    prompt: String,
    path: &str,
    spec: &CaseSpecification,
    mesh: &BTreeSet<String>,
) -> Result<FoamDictionary, RunError> {
    let prompt = match role {
        LlmRole::Editor => wrap_thought(&prompt)?,
        LlmRole::Reasoner => prompt,
    };
    let mut messages = vec![Message::user(prompt)];
    let mut last = String::new();
    for _ in 0..2 {
        let (text, _) = gateway.complete(role, purpose, messages.clone())?;
        let result = answer_file(&text, path).and_then(|mut d| {
            if !d.has_header() {
                d.set_header(&FoamHeader::for_case_path(path));
            }
            check_patched(path, &d, spec, mesh).map(|_| d)
        });
        match result {
            Ok(d) => return Ok(d),
            Err(e) => {
                log::warn!("{purpose} {path}: rejected answer: {e}");
                last = e.clone();
                messages.push(Message::assistant(text));
                messages.push(Message::user(format!(
                    "That file cannot be used: {e}. Reply again with the complete corrected file {path} only."
                )));
            }
        }
    }
    Err(RunError::Correction(format!("{path}: {last}")))
}

fn read_text(case_dir: &Path, rel: &str) -> Result<String, RunError> {
    let p = case_dir.join(rel);
    std::fs::read_to_string(&p).map_err(|e| RunError::io(p.display(), e))
}

/// Applies the correction pathway for a diagnosis and writes the patched file.
pub fn correct(
    diagnosis: &ErrorDiagnosis,
    case_dir: &Path,
    spec: &CaseSpecification,
    kb: &KnowledgeBase,
    gateway: &Gateway,
) -> Result<Correction, RunError> {
    let target = diagnosis
        .target_file
        .clone()
        .or_else(|| diagnosis.missing_name.clone())
        .ok_or_else(|| RunError::Correction("diagnosis names no file".into()))?;
    let mesh: BTreeSet<String> = read_boundary(case_dir)
        .map(|ps| ps.into_iter().map(|p| p.name).collect())
        .unwrap_or_default();
    let spec_json = serde_json::to_string_pretty(&spec.boundaries).expect("boundaries serialize");
    let evidence = &diagnosis.evidence;
    let mut advice = None;

    let dict = match diagnosis.category {
        ErrorCategory::Dimension => {
            let refs = references(kb, spec, &target);
            let prompt = format!(
                "The {} case fails with a dimension error:\n{evidence}\n\nCorrect the dimensions entry of {target} so it \
                 matches the reference files below, which use the same solver family. Change nothing else.\n\n\
                 Reference files:\n{}\n\nCurrent {target}:\n{}\n\nReply with the complete corrected file.",
                spec.solver,
                references_text(&refs),
                read_text(case_dir, &target)?
            );
            ask_file(gateway, LlmRole::Editor, PURPOSE_FIX_DIMENSIONS, prompt, &target, spec, &mesh)?
        }
        ErrorCategory::MissingFile => {
            let refs = references(kb, spec, &target);
            let context = build_context(case_dir).map_err(|e| RunError::io(case_dir.display(), e))?;
            let prompt = format!(
                "The {} case is missing the file {target}:\n{evidence}\n\nWrite {target}, using the reference template \
                 below and keeping it consistent with the existing case files in boundary patches, dimensions and \
                 solver settings. The mesh patches are {:?}. Boundary conditions required by the case \
                 specification:\n{spec_json}\n\nReference template:\n{}\n\nExisting case files:\n{}\n\n\
                 Reply with the complete file.",
                spec.solver,
                mesh,
                references_text(&refs),
                context.to_json()
            );
            ask_file(gateway, LlmRole::Reasoner, PURPOSE_CREATE_FILE, prompt, &target, spec, &mesh)?
        }
        ErrorCategory::Persistent => {
            let refs = references(kb, spec, &target);
            let prompt = format!(
                "Earlier corrections of {target} did not fix this recurring error:\n{evidence}\n\nRewrite {target} \
                 completely, following the reference files below. Boundary conditions required by the case \
                 specification:\n{spec_json}\n\nReference files:\n{}\n\nCurrent {target}:\n{}\n\n\
                 Reply with the complete rewritten file.",
                references_text(&refs),
                read_text(case_dir, &target)?
            );
            ask_file(gateway, LlmRole::Editor, PURPOSE_REWRITE, prompt, &target, spec, &mesh)?
        }
        ErrorCategory::General => {
            let current = read_text(case_dir, &target)?;
            let prompt = format!(
                "The {} case fails with:\n{evidence}\n\nThe error is located in {target}:\n{current}\n\n\
                 Give step-by-step advice for correcting {target}. Keep every boundary condition type unchanged.",
                spec.solver
            );
            let (text, _) = gateway.complete(LlmRole::Reasoner, PURPOSE_PROPOSE, vec![Message::user(prompt)])?;
            let steps = extract_answer(&text);
            if steps.trim().is_empty() {
                return Err(RunError::Correction(format!("{target}: empty correction advice")));
            }
            let prompt = format!(
                "Apply this correction advice to {target}, changing only what the advice requires:\n{steps}\n\n\
                 Current {target}:\n{current}\n\nReply with the complete corrected file."
            );
            advice = Some(steps);
            ask_file(gateway, LlmRole::Editor, PURPOSE_APPLY, prompt, &target, spec, &mesh)?
        }
    };

    write_file(case_dir, &target, &dict)?;
    Ok(Correction {
        category: diagnosis.category,
        patched: vec![target],
        advice,
    })
}
