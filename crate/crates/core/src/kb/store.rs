use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DroppedCase, KbError, KnowledgeBase, RequiredFileSet, TutorialCase};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: u32,
    cases: &'a [TutorialCase],
    solver_files: &'a BTreeMap<String, RequiredFileSet>,
    model_files: &'a BTreeMap<String, RequiredFileSet>,
    dropped: &'a [DroppedCase],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentIn {
    schema_version: u32,
    cases: Vec<TutorialCase>,
    solver_files: BTreeMap<String, RequiredFileSet>,
    model_files: BTreeMap<String, RequiredFileSet>,
    #[serde(default)]
    dropped: Vec<DroppedCase>,
}

pub fn export_database(kb: &KnowledgeBase) -> String {
    let doc = DocumentOut {
        schema_version: SCHEMA_VERSION,
        cases: &kb.cases,
        solver_files: &kb.solver_files,
        model_files: &kb.model_files,
        dropped: &kb.dropped,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("knowledge base serializes");
    s.push('\n');
    s
}

pub fn load_database(doc: &str) -> Result<KnowledgeBase, KbError> {
    let raw: serde_json::Value = serde_json::from_str(doc).map_err(|e| KbError::Schema(e.to_string()))?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(KbError::Schema(format!("unsupported schema_version {v}"))),
        None => return Err(KbError::Schema("missing schema_version".into())),
    }
    let doc: DocumentIn = serde_json::from_value(raw).map_err(|e| KbError::Schema(e.to_string()))?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);

    let mut seen = std::collections::BTreeSet::new();
    for c in &doc.cases {
        if !seen.insert(c.id.as_str()) {
            return Err(KbError::Schema(format!("duplicate case id '{}'", c.id)));
        }
        if !c.files.contains_key("system/controlDict") {
            return Err(KbError::Schema(format!("case '{}' has no system/controlDict", c.id)));
        }
    }
    let kb = KnowledgeBase::from_cases(doc.cases, doc.dropped);
    // file maps are derived data; a document that disagrees was edited by hand
    if kb.solver_files != doc.solver_files || kb.model_files != doc.model_files {
        return Err(KbError::Schema("file requirement maps do not match the case list".into()));
    }
    Ok(kb)
}

impl KnowledgeBase {
    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        std::fs::write(path, export_database(self)).map_err(|e| KbError::Io(path.display().to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| KbError::Io(path.display().to_string(), e.to_string()))?;
        load_database(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_kb_export() {
        let doc = export_database(&KnowledgeBase::default());
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["cases"], serde_json::json!([]));
        assert_eq!(load_database(&doc).unwrap(), KnowledgeBase::default());
    }

    #[test]
    fn version_mismatch_is_schema_error() {
        let doc = r#"{"schema_version": 2, "cases": [], "solver_files": {}, "model_files": {}}"#;
        assert!(matches!(load_database(doc), Err(KbError::Schema(_))));
        assert!(matches!(load_database("{"), Err(KbError::Schema(_))));
        assert!(matches!(load_database(r#"{"cases": []}"#), Err(KbError::Schema(_))));
        assert!(matches!(
            load_database(r#"{"schema_version": 1, "cases": 3, "solver_files": {}, "model_files": {}}"#),
            Err(KbError::Schema(_))
        ));
    }
}
