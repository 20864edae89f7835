//! Document-segment relevance filtering, tutorial reference retrieval and
//! live-case context snapshots.

mod scorer;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::CaseSpecification;
use crate::foam::{FlowRegime, FoamDictionary};
use crate::kb::{KnowledgeBase, TutorialCase};

pub use scorer::{segment_document, tokenize, LexicalScorer, RelevanceScorer};

pub const DEFAULT_SEGMENT_THRESHOLD: f64 = 0.15;
pub const DEFAULT_REFERENCE_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("query or segment is empty after normalization")]
    EmptyInput,
    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(String),
    #[error("reference count must be at least 1")]
    InvalidCount,
    #[error("no knowledge-base case contains {0}")]
    NoCandidates(String),
    #[error("{0}: {1}")]
    Io(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub text: String,
}

impl Segment {
    pub fn new(label: &str, text: &str) -> Self {
        Segment {
            label: label.to_string(),
            text: text.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub segment: Segment,
    pub score: f64,
}

/// Query terms describing a specification: solver, models and boundaries.
pub fn spec_query(spec: &CaseSpecification) -> String {
    let mut terms = vec![spec.solver.clone()];
    terms.extend(spec.turbulence_model.iter().cloned());
    terms.extend(spec.thermo_model.iter().cloned());
    for (patch, b) in &spec.boundaries {
        terms.push(patch.clone());
        terms.extend(b.bc_type.iter().cloned());
        terms.extend(b.field_types.values().cloned());
    }
    terms.join(" ")
}

/// Scores every segment against the specification's query, idf-weighted
/// over the document itself.
pub fn score_segments(document: &[Segment], spec: &CaseSpecification) -> Vec<SegmentScore> {
    let scorer = LexicalScorer::with_corpus(document.iter().map(|s| s.text.as_str()));
    let query = spec_query(spec);
    document
        .iter()
        .map(|seg| SegmentScore {
            segment: seg.clone(),
            score: scorer.score(&query, &seg.text).unwrap_or(0.0),
        })
        .collect()
}

/// Segments scoring at least `threshold`, in document order.
pub fn filter_segments(
    document: &[Segment],
    spec: &CaseSpecification,
    threshold: f64,
) -> Result<Vec<Segment>, RetrievalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(RetrievalError::InvalidThreshold(threshold.to_string()));
    }
    Ok(score_segments(document, spec)
        .into_iter()
        .filter(|s| s.score >= threshold)
        .map(|s| s.segment)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceItem {
    pub case_id: String,
    pub path: String,
    pub content: FoamDictionary,
    pub match_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub items: Vec<ReferenceItem>,
}

impl ReferenceBundle {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn first(&self) -> Option<&ReferenceItem> {
        self.items.first()
    }
}

fn case_metadata(c: &TutorialCase) -> String {
    let mut parts: Vec<&str> = c.id.split('/').collect();
    parts.push(&c.solver);
    parts.extend(c.turbulence_model.as_deref());
    parts.extend(c.thermo_model.as_deref());
    parts.join(" ")
}

/// Up to `k` exemplar files for `target_path`, ranked by solver match, then
/// turbulence-model match, then flow-regime match, then lexical similarity of
/// case metadata; ties go to the smaller case id. Cases of the wrong regime
/// are excluded whenever a case of the right regime is available.
pub fn retrieve_references(
    kb: &KnowledgeBase,
    spec: &CaseSpecification,
    target_path: &str,
    k: usize,
) -> Result<ReferenceBundle, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidCount);
    }
    let mut candidates: Vec<&TutorialCase> = kb.cases.iter().filter(|c| c.has_file(target_path)).collect();
    if candidates.is_empty() {
        return Err(RetrievalError::NoCandidates(target_path.to_string()));
    }
    if spec.flow_regime != FlowRegime::Unknown && candidates.iter().any(|c| c.flow_regime == spec.flow_regime) {
        candidates.retain(|c| c.flow_regime == spec.flow_regime);
    }

    let meta: Vec<String> = kb.cases.iter().map(case_metadata).collect();
    let scorer = LexicalScorer::with_corpus(meta.iter().map(String::as_str));
    let query = spec_query(spec);
    let mut ranked: Vec<(u8, f64, &TutorialCase)> = candidates
        .into_iter()
        .map(|c| {
            let solver = (c.solver == spec.solver) as u8;
            let model = (c.turbulence_model == spec.turbulence_model) as u8;
            let regime = (c.flow_regime == spec.flow_regime) as u8;
            let lex = scorer.score(&query, &case_metadata(c)).unwrap_or(0.0);
            (solver * 4 + model * 2 + regime, lex, c)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then_with(|| a.2.id.cmp(&b.2.id))
    });
    let items = ranked
        .into_iter()
        .take(k)
        .map(|(rank, lex, c)| ReferenceItem {
            case_id: c.id.clone(),
            path: target_path.to_string(),
            content: c.files[target_path].clone(),
            match_score: (2.0 * f64::from(rank) + lex) / 15.0,
        })
        .collect();
    Ok(ReferenceBundle { items })
}

/// Text snapshot of a live case's configuration, keyed by case-relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseContext {
    pub snapshot: BTreeMap<String, String>,
}

impl CaseContext {
    pub fn contains(&self, path: &str) -> bool {
        self.snapshot.contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.snapshot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.snapshot.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot).expect("string map serializes")
    }
}

/// Reads `0/`, `constant/` (without `polyMesh/`) and `system/` of a case.
/// Non-UTF-8 files are skipped. Nothing is written.
pub fn build_context(case_dir: &Path) -> Result<CaseContext, RetrievalError> {
    let io = |e: &dyn std::fmt::Display| RetrievalError::Io(case_dir.display().to_string(), e.to_string());
    std::fs::read_dir(case_dir).map_err(|e| io(&e))?;
    let mut snapshot = BTreeMap::new();
    for top in ["0", "constant", "system"] {
        let dir = case_dir.join(top);
        if !dir.is_dir() {
            continue;
        }
        let walker = walkdir::WalkDir::new(&dir)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| !(top == "constant" && e.depth() == 1 && e.file_name() == "polyMesh"));
        for entry in walker {
            let entry = entry.map_err(|e| io(&e))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(case_dir)
                .expect("walk stays under case dir")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = std::fs::read(entry.path()).map_err(|e| io(&e))?;
            if let Ok(text) = String::from_utf8(bytes) {
                snapshot.insert(rel, text);
            }
        }
    }
    Ok(CaseContext { snapshot })
}
