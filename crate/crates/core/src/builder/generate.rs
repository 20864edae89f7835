use std::collections::{BTreeMap, BTreeSet};

use super::spec::{spec_violations, CaseSpecification, SpecViolation};
use super::{BuildError, GeneratedCase};
use crate::foam::{
    expected_dimensions, parse_dictionary, serialize_dictionary, FieldFile, FoamDictionary, FoamHeader, FoamValue,
    SUPPORTED_FIELDS,
};
use crate::kb::RequiredFileSet;
use crate::llm::{extract_answer, Gateway, LlmRole, Message};
use crate::retrieval::ReferenceBundle;

pub const PURPOSE_GENERATE: &str = "generate-files";
pub const PURPOSE_REGENERATE: &str = "regenerate-files";

const MARKER_OPEN: &str = "== FILE:";
const MARKER_CLOSE: &str = "==";

/// Splits `== FILE: <path> ==` blocks. Text before the first marker, empty
/// paths and repeated paths are errors.
pub fn parse_file_envelope(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix(MARKER_OPEN) {
            let path = rest
                .strip_suffix(MARKER_CLOSE)
                .ok_or_else(|| format!("line {}: file marker not closed with '=='", n + 1))?
                .trim();
            if path.is_empty() {
                return Err(format!("line {}: empty file path", n + 1));
            }
            if let Some(done) = current.take() {
                out.push(done);
            }
            if out.iter().any(|(p, _)| p == path) {
                return Err(format!("file '{path}' appears twice"));
            }
            current = Some((path.to_string(), String::new()));
            continue;
        }
        match current.as_mut() {
            Some((_, body)) => {
                body.push_str(line);
                body.push('\n');
            }
            None if t.is_empty() => {}
            None => return Err(format!("line {}: text outside any file block", n + 1)),
        }
    }
    if let Some(done) = current {
        out.push(done);
    }
    if out.is_empty() {
        return Err("no file blocks".into());
    }
    Ok(out)
}

/// Parses one generated file and normalizes it: header matching its path,
/// field dimensions from the regime table.
fn finish_file(path: &str, text: &str, spec: &CaseSpecification) -> Result<FoamDictionary, String> {
    let mut d = parse_dictionary(text).map_err(|e| format!("{path}: {e}"))?;
    d.set_header(&FoamHeader::for_case_path(path));
    if let Some(field) = path.strip_prefix("0/") {
        if SUPPORTED_FIELDS.contains(&field) {
            let dims = expected_dimensions(field, spec.flow_regime).map_err(|e| format!("{path}: {e}"))?;
            d.set("dimensions", FoamValue::Dimensions(dims));
        }
        FieldFile::from_dictionary_named(&d, field).map_err(|e| format!("{path}: {e}"))?;
    }
    Ok(d)
}

fn describe(v: &SpecViolation) -> (String, String) {
    match v {
        SpecViolation::TypeMismatch {
            path,
            patch,
            expected,
            found,
        } => (path.clone(), format!("patch {patch} must have type {expected}, not {found}")),
        SpecViolation::MissingPatch { path, patch } => (path.clone(), format!("patch {patch} is missing")),
        SpecViolation::UnexpectedPatch { path, patch } => {
            (path.clone(), format!("patch {patch} does not exist in the mesh"))
        }
        SpecViolation::Unreadable { path, message } => (path.clone(), message.clone()),
    }
}

/// Problems per path: unparseable, missing from the answer, or departing
/// from the specification.
fn validate(
    spec: &CaseSpecification,
    list: &RequiredFileSet,
    raw: &BTreeMap<String, String>,
    files: &mut BTreeMap<String, FoamDictionary>,
) -> BTreeMap<String, Vec<String>> {
    let mut problems: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for path in list.iter() {
        let Some(text) = raw.get(path) else {
            problems.entry(path.to_string()).or_default().push("file was not generated".into());
            continue;
        };
        match finish_file(path, text, spec) {
            Ok(d) => {
                files.insert(path.to_string(), d);
            }
            Err(e) => problems.entry(path.to_string()).or_default().push(e),
        }
    }
    for v in spec_violations(spec, files.iter().map(|(p, d)| (p.as_str(), d))) {
        let (path, msg) = describe(&v);
        problems.entry(path).or_default().push(msg);
    }
    for p in problems.keys() {
        files.remove(p);
    }
    problems
}

fn references_text(references: &ReferenceBundle) -> String {
    references
        .items
        .iter()
        .map(|r| {
            format!(
                "-- reference {} from tutorial {} --\n{}",
                r.path,
                r.case_id,
                serialize_dictionary(&r.content)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn envelope_instructions(paths: &[&str]) -> String {
    format!(
        "Write each file as a line `== FILE: <path> ==` followed by the file's OpenFOAM dictionary text, for \
         exactly these paths: {}. Do not add any other text or markdown. Every field file must define a \
         boundaryField entry for every patch with exactly the boundary type given in the specification.",
        paths.join(", ")
    )
}

/// All configuration files in one Reasoner exchange, validated, with one
/// regeneration of the files that fail.
pub fn generate_files(
    spec: &CaseSpecification,
    list: &RequiredFileSet,
    references: &ReferenceBundle,
    gateway: &Gateway,
) -> Result<GeneratedCase, BuildError> {
    let spec_json = serde_json::to_string_pretty(spec).expect("spec serializes");
    let paths: Vec<&str> = list.iter().collect();
    let prompt = format!(
        "Generate the OpenFOAM v2406 configuration files for this case specification:\n{spec_json}\n\n\
         Use the reference tutorial files below for structure and construct appropriate numerical schemes \
         and solver settings where the specification is silent.\n{}\n\n{}",
        references_text(references),
        envelope_instructions(&paths)
    );
    let messages = vec![Message::user(prompt)];
    let (text, _) = gateway.complete(LlmRole::Reasoner, PURPOSE_GENERATE, messages.clone())?;

    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    let envelope_error = match parse_file_envelope(&extract_answer(&text)) {
        Ok(blocks) => {
            raw.extend(blocks.into_iter().filter(|(p, _)| list.contains(p)));
            None
        }
        Err(e) => Some(e),
    };
    let mut files = BTreeMap::new();
    let problems = validate(spec, list, &raw, &mut files);
    if problems.is_empty() {
        return Ok(GeneratedCase { files, spec: spec.clone() });
    }

    let bad: Vec<&str> = problems.keys().map(String::as_str).collect();
    let mut report = String::new();
    if let Some(e) = &envelope_error {
        report.push_str(&format!("The answer was not in the required format: {e}.\n"));
    }
    for (p, msgs) in &problems {
        report.push_str(&format!("{p}: {}\n", msgs.join("; ")));
    }
    log::warn!("regenerating {} file(s):\n{report}", bad.len());
    let mut retry = messages;
    retry.push(Message::assistant(text));
    retry.push(Message::user(format!(
        "These files have problems:\n{report}\nRegenerate only these files. {}",
        envelope_instructions(&bad)
    )));
    let (text, _) = gateway.complete(LlmRole::Reasoner, PURPOSE_REGENERATE, retry)?;
    let blocks = parse_file_envelope(&extract_answer(&text)).map_err(BuildError::Generation)?;
    let redo: BTreeSet<&str> = bad.iter().copied().collect();
    for (p, body) in blocks {
        if redo.contains(p.as_str()) {
            raw.insert(p, body);
        }
    }
    let mut files = BTreeMap::new();
    let problems = validate(spec, list, &raw, &mut files);
    if !problems.is_empty() {
        let detail = problems
            .iter()
            .map(|(p, m)| format!("{p}: {}", m.join("; ")))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(BuildError::Generation(detail));
    }
    Ok(GeneratedCase { files, spec: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_splits_blocks() {
        let t = "== FILE: 0/p ==\na 1;\n\n== FILE: system/controlDict ==\napplication simpleFoam;\n";
        let blocks = parse_file_envelope(t).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0], ("0/p".into(), "a 1;\n\n".into()));
        assert_eq!(blocks[1].0, "system/controlDict");
    }

    #[test]
    fn envelope_rejects_stray_text() {
        assert!(parse_file_envelope("Sure! Here are the files:\n== FILE: 0/p ==\na 1;").is_err());
        assert!(parse_file_envelope("== FILE: 0/p\na 1;").is_err());
        assert!(parse_file_envelope("== FILE: 0/p ==\n== FILE: 0/p ==\n").is_err());
        assert!(parse_file_envelope("").is_err());
    }
}
