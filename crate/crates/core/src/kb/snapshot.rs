use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::KbError;

/// File listing of one tutorial case with file contents (None for non-text files).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseSnapshot {
    pub id: String,
    pub top_dirs: BTreeSet<String>,
    pub files: BTreeMap<String, Option<String>>,
}

impl CaseSnapshot {
    pub fn new(id: impl Into<String>) -> Self {
        CaseSnapshot {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_file(mut self, rel: &str, text: &str) -> Self {
        if let Some((top, _)) = rel.split_once('/') {
            self.top_dirs.insert(top.to_string());
        }
        self.files.insert(rel.to_string(), Some(text.to_string()));
        self
    }

    pub fn with_dir(mut self, dir: &str) -> Self {
        self.top_dirs.insert(dir.to_string());
        self
    }

    pub fn read(root: &Path, id: impl Into<String>) -> Result<Self, KbError> {
        let mut snap = CaseSnapshot::new(id);
        let entries = fs::read_dir(root).map_err(|e| KbError::Io(root.display().to_string(), e.to_string()))?;
        for e in entries.flatten() {
            if e.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                snap.top_dirs.insert(e.file_name().to_string_lossy().into_owned());
            }
        }
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| KbError::Io(root.display().to_string(), e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir yields children of root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let text = fs::read(entry.path())
                .ok()
                .and_then(|bytes| String::from_utf8(bytes).ok());
            snap.files.insert(rel, text);
        }
        Ok(snap)
    }

    /// Whether `0/` is absent and `0.orig/` stands in for it.
    pub fn uses_orig(&self) -> bool {
        !self.top_dirs.contains("0") && self.top_dirs.contains("0.orig")
    }

    /// Path with `0.orig/` mapped onto `0/` when the case has no `0/`.
    pub fn canonical_path(&self, rel: &str) -> Option<String> {
        if let Some(rest) = rel.strip_prefix("0.orig/") {
            return self.uses_orig().then(|| format!("0/{rest}"));
        }
        Some(rel.to_string())
    }
}
