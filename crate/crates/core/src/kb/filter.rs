use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::snapshot::CaseSnapshot;
use super::tables::MESH_DIRS;
use crate::foam::parse_dictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DropReason {
    ExternalDependency,
    AuxiliaryFolder,
    ExtensiveNonuniformField,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    pub reasons: Vec<DropReason>,
}

impl FilterVerdict {
    fn from_reasons(mut reasons: Vec<DropReason>) -> Self {
        reasons.sort();
        reasons.dedup();
        FilterVerdict {
            keep: reasons.is_empty(),
            reasons,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    /// Drop when a single nonuniform literal has more entries than this.
    pub max_nonuniform_entries: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_nonuniform_entries: 1000,
        }
    }
}

const CASE_DIRS: &[&str] = &["0", "0.orig", "constant", "system"];

/// Configuration dictionaries of a case: everything under the case
/// directories except mesh/geometry data.
pub(crate) fn is_dictionary_path(rel: &str) -> bool {
    let mut parts = rel.split('/');
    let top = parts.next().unwrap_or("");
    if !CASE_DIRS.contains(&top) {
        return false;
    }
    let rest: Vec<&str> = parts.collect();
    match (top, rest.as_slice()) {
        (_, []) => false,
        ("constant", [sub, ..]) if rest.len() > 1 && MESH_DIRS.contains(sub) => false,
        ("0" | "0.orig", [_]) => true,
        ("0" | "0.orig", _) => false,
        _ => true,
    }
}

fn include_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?m)^\s*#(include[A-Za-z]*)\s+"?([^"\s;]*)"?"#).expect("static regex")
    })
}

fn script_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$FOAM_TUTORIALS|\$\{FOAM_TUTORIALS\}|\.\./|/resources/").expect("static regex"))
}

/// Whether an include directive reaches outside the case directory.
fn include_is_external(directive: &str, target: &str) -> bool {
    match directive {
        "include" | "includeIfPresent" => {
            if target.starts_with('<') {
                // <constant>/, <system>/, <case>/ are case-relative
                return !(target.starts_with("<constant>")
                    || target.starts_with("<system>")
                    || target.starts_with("<case>"));
            }
            if target.starts_with('/') || target.starts_with('$') || target.starts_with('~') {
                return !target.starts_with("$FOAM_CASE");
            }
            escapes_root(target)
        }
        // etc/caseDicts, function-object templates, model libraries
        _ => true,
    }
}

/// `a/../../b` style paths relative to a file one level below the case root.
fn escapes_root(target: &str) -> bool {
    let mut depth: i32 = 1;
    for part in target.split('/') {
        match part {
            ".." => depth -= 1,
            "." | "" => {}
            _ => depth += 1,
        }
        if depth < 0 {
            return true;
        }
    }
    false
}

pub fn filter_case(snapshot: &CaseSnapshot, cfg: &FilterConfig) -> FilterVerdict {
    let mut reasons = Vec::new();

    if snapshot.top_dirs.iter().any(|d| !CASE_DIRS.contains(&d.as_str())) {
        reasons.push(DropReason::AuxiliaryFolder);
    }

    for (rel, text) in &snapshot.files {
        let is_root_file = !rel.contains('/');
        if is_root_file {
            if let Some(text) = text {
                if script_re().is_match(text) {
                    reasons.push(DropReason::ExternalDependency);
                }
            }
            continue;
        }
        if !is_dictionary_path(rel) {
            continue;
        }
        let Some(text) = text else {
            reasons.push(DropReason::Unparseable);
            continue;
        };
        for cap in include_re().captures_iter(text) {
            if include_is_external(&cap[1], &cap[2]) {
                reasons.push(DropReason::ExternalDependency);
            }
        }
        match parse_dictionary(text) {
            Ok(tree) => {
                if tree.max_nonuniform_len() > cfg.max_nonuniform_entries {
                    reasons.push(DropReason::ExtensiveNonuniformField);
                }
            }
            Err(e) => {
                log::debug!("{}: {rel}: {e}", snapshot.id);
                reasons.push(DropReason::Unparseable);
            }
        }
    }
    FilterVerdict::from_reasons(reasons)
}
