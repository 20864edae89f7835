use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::executor::ToolRun;
use super::{ErrorCategory, ErrorDiagnosis, RunError};
use crate::builder::{ask_structured, CaseSpecification, StructuredError};
use crate::foam::{expected_dimensions, parse_dictionary, FieldFile, SUPPORTED_FIELDS};
use crate::llm::{wrap_thought, Gateway, LlmRole};
use crate::retrieval::{build_context, CaseContext};

pub const PURPOSE_CONFIRM_MISSING: &str = "confirm-missing-file";
pub const PURPOSE_LOCATE_DIMENSION: &str = "locate-dimension-error";
pub const PURPOSE_LOCALIZE: &str = "localize-error";

const TAIL_LINES: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: u32,
    /// Category indicated by the log, before escalation.
    pub category: ErrorCategory,
    pub target_file: Option<String>,
    pub evidence_hash: String,
    pub escalated: bool,
}

impl HistoryEntry {
    fn same_error(&self, category: ErrorCategory, target: Option<&str>, hash: &str) -> bool {
        self.category == category && self.target_file.as_deref() == target && self.evidence_hash == hash
    }
}

/// Append-only record of diagnoses within one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistory {
    entries: Vec<HistoryEntry>,
}

impl ErrorHistory {
    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn record(&mut self, iteration: u32, d: &ErrorDiagnosis) {
        self.entries.push(HistoryEntry {
            iteration,
            category: d.base_category,
            target_file: d.target_file.clone(),
            evidence_hash: d.evidence_hash.clone(),
            escalated: d.category == ErrorCategory::Persistent,
        });
    }

    /// True when this error would be the `threshold`-th identical one in a
    /// row. Longer streaks escalate only once.
    pub fn escalates(&self, category: ErrorCategory, target: Option<&str>, hash: &str, threshold: u32) -> bool {
        let need = threshold.saturating_sub(1) as usize;
        if need == 0 || self.entries.len() < need {
            return false;
        }
        let tail = &self.entries[self.entries.len() - need..];
        if !tail.iter().all(|e| e.same_error(category, target, hash)) {
            return false;
        }
        let before = self.entries.len() - need;
        before == 0 || !self.entries[before - 1].same_error(category, target, hash)
    }
}

/// The first `FOAM FATAL` block of a log, through its `FOAM exiting` line.
pub fn first_fatal_block(log: &str) -> Option<String> {
    let lines: Vec<&str> = log.lines().collect();
    let start = lines.iter().position(|l| l.contains("FOAM FATAL"))?;
    let end = lines[start..]
        .iter()
        .position(|l| l.trim_start().starts_with("FOAM exiting") || l.trim_start().starts_with("FOAM aborting"))
        .map(|i| start + i)
        .unwrap_or(lines.len() - 1);
    Some(lines[start..=end].join("\n").trim().to_string())
}

fn tail(log: &str, n: usize) -> String {
    let lines: Vec<&str> = log.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

/// Hash of an evidence block with paths and numbers masked, so reruns that
/// differ only in timings or directories hash alike.
pub fn evidence_hash(evidence: &str) -> String {
    static PATH: OnceLock<Regex> = OnceLock::new();
    static NUM: OnceLock<Regex> = OnceLock::new();
    let path = PATH.get_or_init(|| Regex::new(r#"(?:/[^\s"':]+)+"#).unwrap());
    let num = NUM.get_or_init(|| Regex::new(r"[-+]?\b\d+(?:\.\d+)?(?:[eE][-+]?\d+)?\b").unwrap());
    let masked = path.replace_all(evidence, "<path>");
    let masked = num.replace_all(&masked, "#");
    let normalized = masked.split_whitespace().collect::<Vec<_>>().join(" ");
    hex::encode(&Sha256::digest(normalized.as_bytes())[..8])
}

fn missing_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)(?:cannot find file|cannot open file|could not open file|no such file or directory)[^"\n]*"?([^"\s]*)"?"#)
            .unwrap()
    })
}

fn dimension_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)different dimensions|incompatible dimensions|inconsistent dimensions|dimensions\s*:\s*\[[-\d\s]+\]\s*(?:[-+=]|!=)\s*\[")
            .unwrap()
    })
}

/// Case-relative form of a path mentioned in a log, if it names a file
/// under 0/, constant/ or system/.
fn case_relative(raw: &str, case_dir: &Path) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?:^|/)((?:0|constant|system)/[^\s/]+(?:/[^\s/]+)*)$").unwrap());
    let raw = raw.trim().trim_end_matches(['.', ',', ';']);
    let stripped = Path::new(raw)
        .strip_prefix(case_dir)
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_else(|_| raw.to_string());
    re.captures(&stripped).map(|c| c[1].to_string())
}

/// Field files whose dimensions differ from the regime's canonical set.
fn dimension_suspects(context: &CaseContext, spec: &CaseSpecification) -> Vec<String> {
    let mut out = Vec::new();
    for (path, text) in &context.snapshot {
        let Some(field) = path.strip_prefix("0/") else { continue };
        if !SUPPORTED_FIELDS.contains(&field) {
            continue;
        }
        let Ok(expected) = expected_dimensions(field, spec.flow_regime) else { continue };
        let found = parse_dictionary(text)
            .ok()
            .and_then(|d| FieldFile::from_dictionary_named(&d, field).ok())
            .map(|f| f.dimensions);
        if found.is_some_and(|f| f != expected) {
            out.push(path.clone());
        }
    }
    out
}

#[derive(Deserialize)]
struct TargetAnswer {
    target_file: String,
}

#[derive(Deserialize)]
struct MissingAnswer {
    missing_file: String,
}

fn structured_err(e: StructuredError) -> RunError {
    match e {
        StructuredError::Llm(e) => RunError::Llm(e),
        StructuredError::Invalid(m) => RunError::Classification(m),
    }
}

fn ask_target(
    gateway: &Gateway,
    role: LlmRole,
    purpose: &str,
    prompt: String,
    context: &CaseContext,
) -> Result<String, RunError> {
    let prompt = match role {
        LlmRole::Editor => wrap_thought(&prompt)?,
        LlmRole::Reasoner => prompt,
    };
    let a: TargetAnswer = ask_structured(gateway, role, purpose, prompt, |a: TargetAnswer| {
        if context.contains(a.target_file.trim()) {
            Ok(a)
        } else {
            Err(format!("'{}' is not one of the case files", a.target_file))
        }
    })
    .map_err(structured_err)?;
    Ok(a.target_file.trim().to_string())
}

fn file_listing(context: &CaseContext) -> String {
    context.paths().collect::<Vec<_>>().join(", ")
}

/// Assigns a failed run to one of the four categories. Rules go first; the
/// model is asked only where the log alone does not name the file.
pub fn classify_error(
    run: &ToolRun,
    history: &ErrorHistory,
    case_dir: &Path,
    spec: &CaseSpecification,
    gateway: &Gateway,
    persistent_threshold: u32,
) -> Result<ErrorDiagnosis, RunError> {
    let block = first_fatal_block(&run.log);
    let evidence = match (&block, run.timed_out) {
        (Some(b), false) => b.clone(),
        _ => tail(&run.log, TAIL_LINES),
    };
    let hash = evidence_hash(&evidence);
    let context = build_context(case_dir).map_err(|e| RunError::io(case_dir.display(), e))?;
    let scan = block.as_deref().filter(|_| !run.timed_out);

    let (category, target, missing) = if let Some(c) = scan.and_then(|b| missing_re().captures(b)) {
        let name = match case_relative(&c[1], case_dir) {
            Some(rel) => rel,
            None => {
                let prompt = format!(
                    "An OpenFOAM run stopped because a file could not be found:\n{evidence}\n\n\
                     Which case file is missing? Answer with a JSON object {{\"missing_file\": \"<dir>/<name>\"}} \
                     where <dir> is 0, constant or system."
                );
                let a: MissingAnswer = ask_structured(gateway, LlmRole::Editor, PURPOSE_CONFIRM_MISSING, wrap_thought(&prompt)?, |a: MissingAnswer| {
                    case_relative(&a.missing_file, case_dir)
                        .map(|missing_file| MissingAnswer { missing_file })
                        .ok_or_else(|| format!("'{}' is not a case file path", a.missing_file))
                })
                .map_err(structured_err)?;
                a.missing_file
            }
        };
        (ErrorCategory::MissingFile, Some(name.clone()), Some(name))
    } else if scan.is_some_and(|b| dimension_re().is_match(b)) {
        let suspects = dimension_suspects(&context, spec);
        let target = match suspects.first() {
            Some(t) => t.clone(),
            None => {
                let prompt = format!(
                    "An OpenFOAM run failed with a dimension error:\n{evidence}\n\nCase files: {}.\n\
                     Which file holds the wrong dimensions? Answer with a JSON object {{\"target_file\": \"<path>\"}}.",
                    file_listing(&context)
                );
                ask_target(gateway, LlmRole::Editor, PURPOSE_LOCATE_DIMENSION, prompt, &context)?
            }
        };
        (ErrorCategory::Dimension, Some(target), None)
    } else {
        let prompt = format!(
            "An OpenFOAM {} run failed. Error output:\n{evidence}\n\nCurrent case files:\n{}\n\n\
             Which single file must be changed to fix this error? Answer with a JSON object \
             {{\"target_file\": \"<path>\"}} using one of: {}.",
            spec.solver,
            context.to_json(),
            file_listing(&context)
        );
        let target = ask_target(gateway, LlmRole::Reasoner, PURPOSE_LOCALIZE, prompt, &context)?;
        (ErrorCategory::General, Some(target), None)
    };

    let escalate = history.escalates(category, target.as_deref(), &hash, persistent_threshold);
    Ok(ErrorDiagnosis {
        category: if escalate { ErrorCategory::Persistent } else { category },
        target_file: target,
        evidence,
        evidence_hash: hash,
        missing_name: missing,
        base_category: category,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(cat: ErrorCategory, target: &str, hash: &str) -> ErrorDiagnosis {
        ErrorDiagnosis {
            category: cat,
            target_file: Some(target.into()),
            evidence: String::new(),
            evidence_hash: hash.into(),
            missing_name: None,
            base_category: cat,
        }
    }

    #[test]
    fn escalates_once_per_streak() {
        let mut h = ErrorHistory::default();
        let d = diag(ErrorCategory::Dimension, "0/p", "h");
        let mut fired = Vec::new();
        for i in 1..=7 {
            let esc = h.escalates(d.category, Some("0/p"), "h", 3);
            fired.push(esc);
            let mut this = d.clone();
            if esc {
                this.category = ErrorCategory::Persistent;
            }
            h.record(i, &this);
        }
        assert_eq!(fired, [false, false, true, false, false, false, false]);
    }

    #[test]
    fn different_target_breaks_streak() {
        let mut h = ErrorHistory::default();
        h.record(1, &diag(ErrorCategory::General, "system/fvSchemes", "h"));
        h.record(2, &diag(ErrorCategory::General, "system/fvSolution", "h"));
        assert!(!h.escalates(ErrorCategory::General, Some("system/fvSolution"), "h", 3));
        h.record(3, &diag(ErrorCategory::General, "system/fvSolution", "h"));
        assert!(h.escalates(ErrorCategory::General, Some("system/fvSolution"), "h", 3));
    }

    #[test]
    fn hash_ignores_paths_and_numbers() {
        let a = "--> FOAM FATAL IO ERROR:\ncannot find file \"/tmp/a/case/0/nut\"\nfile: /tmp/a at line 12.";
        let b = "--> FOAM FATAL IO ERROR:\ncannot find file \"/home/x/case/0/nut\"\nfile: /home/x at line 99.";
        let c = "--> FOAM FATAL IO ERROR:\nEntry 'div(phi,U)' not found";
        assert_eq!(evidence_hash(a), evidence_hash(b));
        assert_ne!(evidence_hash(a), evidence_hash(c));
    }

    #[test]
    fn fatal_block_bounds() {
        let log = "Time = 1\n\n--> FOAM FATAL ERROR: (openfoam-2406)\nboom\n\nFOAM exiting\ntrailing\n";
        assert_eq!(
            first_fatal_block(log).unwrap(),
            "--> FOAM FATAL ERROR: (openfoam-2406)\nboom\n\nFOAM exiting"
        );
        assert!(first_fatal_block("all good\nEnd\n").is_none());
    }

    #[test]
    fn relative_paths() {
        let case = Path::new("/work/case");
        assert_eq!(case_relative("/work/case/0/nut", case).as_deref(), Some("0/nut"));
        assert_eq!(case_relative("/elsewhere/run/system/fvSchemes", case).as_deref(), Some("system/fvSchemes"));
        assert_eq!(case_relative("0/U.", case).as_deref(), Some("0/U"));
        assert_eq!(case_relative("/usr/lib/libfoo.so", case), None);
    }
}
