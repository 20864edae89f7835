use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::filter::{filter_case, is_dictionary_path, DropReason, FilterConfig};
use super::snapshot::CaseSnapshot;
use super::tables::{COMPRESSIBLE_SOLVERS, INCOMPRESSIBLE_SOLVERS, TURBULENCE_FIELDS, UTILITY_DICTS};
use super::{DroppedCase, KbError, KnowledgeBase, RequiredFileSet, TutorialCase};
use crate::foam::{parse_dictionary, FlowRegime, FoamDictionary};

pub fn ingest_tree(root: &Path) -> Result<KnowledgeBase, KbError> {
    ingest_tree_with(root, &FilterConfig::default())
}

pub fn ingest_tree_with(root: &Path, cfg: &FilterConfig) -> Result<KnowledgeBase, KbError> {
    if !root.is_dir() {
        return Err(KbError::Ingest(format!("{} is not a readable directory", root.display())));
    }
    std::fs::read_dir(root).map_err(|e| KbError::Ingest(format!("{}: {e}", root.display())))?;

    let mut cases = Vec::new();
    let mut dropped = Vec::new();
    for dir in discover_cases(root) {
        let id = relative_id(root, &dir);
        let snap = CaseSnapshot::read(&dir, id.clone())?;
        let verdict = filter_case(&snap, cfg);
        if !verdict.keep {
            log::info!("dropping {id}: {:?}", verdict.reasons);
            dropped.push(DroppedCase { id, reasons: verdict.reasons });
            continue;
        }
        match build_case(&snap, &dir) {
            Some(c) => cases.push(c),
            None => {
                log::info!("dropping {id}: no solver could be determined");
                dropped.push(DroppedCase {
                    id,
                    reasons: vec![DropReason::Unparseable],
                });
            }
        }
    }
    Ok(KnowledgeBase::from_cases(cases, dropped))
}

/// Directories holding `system/controlDict`; nested directories of a case
/// belong to that case.
fn discover_cases(root: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut it = walkdir::WalkDir::new(root).sort_by_file_name().into_iter();
    while let Some(entry) = it.next() {
        let Ok(entry) = entry else { continue };
        if !entry.file_type().is_dir() {
            continue;
        }
        if entry.path().join("system").join("controlDict").is_file() {
            found.push(entry.path().to_path_buf());
            it.skip_current_dir();
        }
    }
    found
}

fn relative_id(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let id = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/");
    if id.is_empty() {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| ".".into())
    } else {
        id
    }
}

fn build_case(snap: &CaseSnapshot, dir: &Path) -> Option<TutorialCase> {
    let mut files = BTreeMap::new();
    for (rel, text) in &snap.files {
        if !is_dictionary_path(rel) {
            continue;
        }
        let Some(path) = snap.canonical_path(rel) else { continue };
        // filter_case has already rejected unparseable input
        let tree = parse_dictionary(text.as_deref()?).ok()?;
        files.insert(path, tree.without_header());
    }
    let control = files.get("system/controlDict")?;
    let solver = control
        .get_word("application")
        .map(str::to_string)
        .or_else(|| solver_from_path(dir))?;
    let turbulence_model = turbulence_model(&files);
    let thermo_model = thermo_model(&files);
    let has_thermo_file = files.contains_key("constant/thermophysicalProperties")
        || files.contains_key("constant/thermodynamicProperties");
    let flow_regime = if has_thermo_file || COMPRESSIBLE_SOLVERS.contains(&solver.as_str()) {
        FlowRegime::Compressible
    } else if INCOMPRESSIBLE_SOLVERS.contains(&solver.as_str()) {
        FlowRegime::Incompressible
    } else {
        FlowRegime::Unknown
    };
    Some(TutorialCase {
        id: snap.id.clone(),
        solver,
        turbulence_model,
        thermo_model,
        flow_regime,
        files,
    })
}

/// Tutorials live under `<category>/<solver>/<case>`.
fn solver_from_path(dir: &Path) -> Option<String> {
    dir.ancestors()
        .filter_map(|a| a.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .find(|n| n.ends_with("Foam"))
}

pub(crate) fn turbulence_model(files: &BTreeMap<String, FoamDictionary>) -> Option<String> {
    let d = files
        .get("constant/turbulenceProperties")
        .or_else(|| files.get("constant/momentumTransport"))?;
    let sim = d.get_word("simulationType")?;
    let model = match sim {
        "RAS" | "RASModel" => {
            let sub = d.get_dict("RAS");
            sub.and_then(|s| s.get_word("RASModel").or_else(|| s.get_word("model")))
                .or_else(|| d.get_word("RASModel"))
        }
        "LES" | "LESModel" => {
            let sub = d.get_dict("LES");
            sub.and_then(|s| s.get_word("LESModel").or_else(|| s.get_word("model")))
                .or_else(|| d.get_word("LESModel"))
        }
        _ => None,
    }?;
    (!super::is_no_model(model)).then(|| model.to_string())
}

pub(crate) fn thermo_model(files: &BTreeMap<String, FoamDictionary>) -> Option<String> {
    let d = files
        .get("constant/thermophysicalProperties")
        .or_else(|| files.get("constant/thermodynamicProperties"))?;
    if let Some(t) = d.get_dict("thermoType").and_then(|t| t.get_word("type")) {
        return Some(t.to_string());
    }
    // legacy form: thermoType hePsiThermo<pureMixture<...>>;
    let w = d.get_word("thermoType")?;
    let head = w.split('<').next().unwrap_or(w).trim();
    (!head.is_empty()).then(|| head.to_string())
}

/// Case files that count as configuration: fields directly under `0/`,
/// top-level `constant/` dictionaries and non-utility `system/` dictionaries.
fn config_paths(case: &TutorialCase) -> BTreeSet<&str> {
    case.files
        .keys()
        .map(String::as_str)
        .filter(|p| {
            let parts: Vec<&str> = p.split('/').collect();
            match parts.as_slice() {
                ["0" | "constant", _] => true,
                ["system", name] => !UTILITY_DICTS.contains(name),
                _ => false,
            }
        })
        .collect()
}

/// Intersection of configuration paths over every case in each index bucket.
/// Solver sets leave out turbulence-model fields; those come from model sets.
pub(super) fn mine(
    cases: &[TutorialCase],
    index: &BTreeMap<String, Vec<String>>,
    strip_turbulence: bool,
) -> BTreeMap<String, RequiredFileSet> {
    let by_id: BTreeMap<&str, &TutorialCase> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut out = BTreeMap::new();
    for (key, ids) in index {
        let mut common: Option<BTreeSet<&str>> = None;
        for id in ids {
            let Some(case) = by_id.get(id.as_str()) else { continue };
            let paths = config_paths(case);
            common = Some(match common {
                None => paths,
                Some(c) => c.intersection(&paths).copied().collect(),
            });
        }
        let Some(common) = common else { continue };
        let paths = common.into_iter().filter(|p| {
            !(strip_turbulence
                && p.strip_prefix("0/")
                    .is_some_and(|f| TURBULENCE_FIELDS.contains(&f)))
        });
        let set = RequiredFileSet::from_paths(paths).expect("config paths are case-relative");
        out.insert(key.clone(), set);
    }
    out
}
