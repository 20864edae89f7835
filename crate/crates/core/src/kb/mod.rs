//! Tutorial knowledge base: ingestion of an OpenFOAM tutorial tree,
//! filtering, metadata tagging and required-file queries.

mod filter;
mod ingest;
pub(crate) use ingest::{thermo_model, turbulence_model};
mod snapshot;
mod store;
mod tables;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foam::{FlowRegime, FoamDictionary};

pub use filter::{filter_case, DropReason, FilterConfig, FilterVerdict};
pub use ingest::{ingest_tree, ingest_tree_with};
pub use snapshot::CaseSnapshot;
pub use store::{export_database, load_database, SCHEMA_VERSION};
pub use tables::{
    is_steady_solver, COMPRESSIBLE_SOLVERS, INCOMPRESSIBLE_SOLVERS, MAX_CO_SOLVERS, MESH_DIRS, STEADY_SOLVERS,
    TURBULENCE_FIELDS, UTILITY_DICTS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("cannot ingest tree: {0}")]
    Ingest(String),
    #[error("unknown solver '{0}'")]
    UnknownSolver(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("invalid case path '{0}'")]
    InvalidPath(String),
    #[error("database schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialCase {
    pub id: String,
    pub solver: String,
    pub turbulence_model: Option<String>,
    pub thermo_model: Option<String>,
    pub flow_regime: FlowRegime,
    /// Parsed dictionaries keyed by case-relative path, FoamFile headers removed.
    pub files: BTreeMap<String, FoamDictionary>,
}

impl TutorialCase {
    pub fn has_file(&self, rel: &str) -> bool {
        self.files.contains_key(rel)
    }
}

/// Ordered, duplicate-free set of case-relative paths under `0/`,
/// `constant/` or `system/`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct RequiredFileSet {
    paths: Vec<String>,
}

fn dir_rank(path: &str) -> Option<u8> {
    let (top, rest) = path.split_once('/')?;
    if rest.is_empty() || rest.split('/').any(|p| p.is_empty() || p == "." || p == "..") {
        return None;
    }
    match top {
        "0" => Some(0),
        "constant" => Some(1),
        "system" => Some(2),
        _ => None,
    }
}

impl RequiredFileSet {
    pub fn from_paths<I, S>(paths: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = RequiredFileSet::default();
        for p in paths {
            set.insert(p.into())?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, path: String) -> Result<(), KbError> {
        let rank = dir_rank(&path).ok_or_else(|| KbError::InvalidPath(path.clone()))?;
        let key = |p: &String| (dir_rank(p).unwrap_or(u8::MAX), p.clone());
        match self.paths.binary_search_by(|p| key(p).cmp(&(rank, path.clone()))) {
            Ok(_) => {}
            Err(i) => self.paths.insert(i, path),
        }
        Ok(())
    }

    pub fn union(&self, other: &RequiredFileSet) -> RequiredFileSet {
        let mut out = self.clone();
        for p in &other.paths {
            out.insert(p.clone()).expect("paths already validated");
        }
        out
    }

    pub fn contains(&self, path: &str) -> bool {
        self.paths.iter().any(|p| p == path)
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.paths.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

impl<'de> Deserialize<'de> for RequiredFileSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let paths = Vec::<String>::deserialize(d)?;
        RequiredFileSet::from_paths(paths).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for RequiredFileSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.paths {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCase {
    pub id: String,
    pub reasons: Vec<DropReason>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    /// Sorted by id.
    pub cases: Vec<TutorialCase>,
    pub solver_index: BTreeMap<String, Vec<String>>,
    pub model_index: BTreeMap<String, Vec<String>>,
    pub solver_files: BTreeMap<String, RequiredFileSet>,
    pub model_files: BTreeMap<String, RequiredFileSet>,
    pub dropped: Vec<DroppedCase>,
}

fn is_no_model(model: &str) -> bool {
    model.is_empty() || model.eq_ignore_ascii_case("laminar") || model.eq_ignore_ascii_case("none")
}

impl KnowledgeBase {
    /// Builds indexes and mined file requirements from a case list.
    pub fn from_cases(mut cases: Vec<TutorialCase>, dropped: Vec<DroppedCase>) -> Self {
        cases.sort_by(|a, b| a.id.cmp(&b.id));
        let mut kb = KnowledgeBase {
            cases,
            dropped,
            ..Default::default()
        };
        kb.rebuild_indexes();
        kb
    }

    pub(crate) fn rebuild_indexes(&mut self) {
        self.solver_index.clear();
        self.model_index.clear();
        for c in &self.cases {
            self.solver_index.entry(c.solver.clone()).or_default().push(c.id.clone());
            if let Some(m) = &c.turbulence_model {
                self.model_index.entry(m.clone()).or_default().push(c.id.clone());
            }
        }
        self.solver_files = ingest::mine(&self.cases, &self.solver_index, true);
        self.model_files = ingest::mine(&self.cases, &self.model_index, false);
    }

    pub fn case(&self, id: &str) -> Option<&TutorialCase> {
        self.cases
            .binary_search_by(|c| c.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.cases[i])
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    fn solver_set(&self, solver: &str) -> Option<RequiredFileSet> {
        self.solver_files
            .get(solver)
            .cloned()
            .or_else(|| tables::seeds().solvers.get(solver).map(|p| tables::seed_set(p)))
    }

    fn model_set(&self, model: &str) -> Option<RequiredFileSet> {
        self.model_files
            .get(model)
            .cloned()
            .or_else(|| tables::seeds().models.get(model).map(|p| tables::seed_set(p)))
    }

    /// Files a case with this solver/model/thermo combination must provide.
    /// Mined statistics take precedence over the bundled seed table.
    pub fn required_files(
        &self,
        solver: &str,
        turbulence_model: Option<&str>,
        thermo_model: Option<&str>,
    ) -> Result<RequiredFileSet, KbError> {
        let mut set = self
            .solver_set(solver)
            .ok_or_else(|| KbError::UnknownSolver(solver.to_string()))?;
        let model = turbulence_model.filter(|m| !is_no_model(m));
        if let Some(m) = model {
            let ms = self.model_set(m).ok_or_else(|| KbError::UnknownModel(m.to_string()))?;
            set = set.union(&ms);
        }
        if let Some(t) = thermo_model.filter(|t| !t.is_empty()) {
            let seeds = tables::seeds();
            let ts = seeds
                .thermo
                .get(t)
                .ok_or_else(|| KbError::UnknownModel(t.to_string()))?;
            set = set.union(&tables::seed_set(ts));
            if model.is_some() {
                set = set.union(&tables::seed_set(&seeds.compressible_turbulence));
            }
        }
        Ok(set)
    }

    /// Reference cases for a solver, in id order.
    pub fn cases_for_solver(&self, solver: &str) -> impl Iterator<Item = &TutorialCase> {
        self.solver_index
            .get(solver)
            .into_iter()
            .flatten()
            .filter_map(|id| self.case(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::default()
    }

    #[test]
    fn file_set_order_and_dedup() {
        let s = RequiredFileSet::from_paths(["system/fvSolution", "0/U", "constant/a", "0/U", "0/T"]).unwrap();
        assert_eq!(s.paths(), ["0/T", "0/U", "constant/a", "system/fvSolution"]);
        assert!(RequiredFileSet::from_paths(["etc/x"]).is_err());
        assert!(RequiredFileSet::from_paths(["0/"]).is_err());
        assert!(RequiredFileSet::from_paths(["0/../x"]).is_err());
    }

    #[test]
    fn seed_simple_foam() {
        let s = kb().required_files("simpleFoam", None, None).unwrap();
        assert_eq!(
            s.paths(),
            [
                "0/U",
                "0/p",
                "constant/transportProperties",
                "constant/turbulenceProperties",
                "system/controlDict",
                "system/fvSchemes",
                "system/fvSolution"
            ]
        );
    }

    #[test]
    fn seed_model_union() {
        let s = kb().required_files("simpleFoam", Some("kOmegaSST"), None).unwrap();
        assert_eq!(s.len(), 10);
        for p in ["0/k", "0/omega", "0/nut"] {
            assert!(s.contains(p));
        }
        assert_eq!(kb().required_files("simpleFoam", Some("SpalartAllmaras"), None).unwrap().len(), 9);
        assert_eq!(kb().required_files("simpleFoam", Some("laminar"), None).unwrap().len(), 7);
    }

    #[test]
    fn seed_compressible_case() {
        let s = kb()
            .required_files("rhoCentralFoam", Some("SpalartAllmaras"), Some("hePsiThermo"))
            .unwrap();
        assert_eq!(s.len(), 12);
        for p in ["0/T", "0/alphat", "constant/thermodynamicProperties"] {
            assert!(s.contains(p), "{p}");
        }
    }

    #[test]
    fn unknown_names() {
        assert_eq!(
            kb().required_files("noSuchFoam", None, None),
            Err(KbError::UnknownSolver("noSuchFoam".into()))
        );
        assert!(matches!(
            kb().required_files("simpleFoam", Some("noSuchModel"), None),
            Err(KbError::UnknownModel(_))
        ));
    }
}
