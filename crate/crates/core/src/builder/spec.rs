use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::catalog::catalog;
use crate::foam::{FieldFile, FlowRegime, FoamDictionary};
use crate::kb::is_steady_solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Steady,
    Transient,
}

impl TimeMode {
    pub fn for_solver(solver: &str) -> TimeMode {
        if is_steady_solver(solver) {
            TimeMode::Steady
        } else {
            TimeMode::Transient
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// Patch-level type applied to every field without an override.
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub bc_type: Option<String>,
    /// Per-field type overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub field_types: BTreeMap<String, String>,
    /// Per-field value literals, e.g. `uniform (25.75 3.62 0)`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, String>,
}

impl BoundarySpec {
    pub fn patch_type(t: &str) -> Self {
        BoundarySpec {
            bc_type: Some(t.to_string()),
            ..Default::default()
        }
    }

    pub fn with_field(mut self, field: &str, t: &str) -> Self {
        self.field_types.insert(field.to_string(), t.to_string());
        self
    }

    pub fn with_value(mut self, field: &str, v: &str) -> Self {
        self.values.insert(field.to_string(), v.to_string());
        self
    }

    pub fn type_for(&self, field: &str) -> Option<&str> {
        self.field_types.get(field).or(self.bc_type.as_ref()).map(String::as_str)
    }

    fn all_types(&self) -> impl Iterator<Item = (Option<&str>, &str)> {
        self.bc_type
            .iter()
            .map(|t| (None, t.as_str()))
            .chain(self.field_types.iter().map(|(f, t)| (Some(f.as_str()), t.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpecification {
    /// Label of the case in its source document, e.g. "Case 1".
    pub name: String,
    pub solver: String,
    pub turbulence_model: Option<String>,
    pub thermo_model: Option<String>,
    pub flow_regime: FlowRegime,
    pub time_mode: TimeMode,
    pub boundaries: BTreeMap<String, BoundarySpec>,
    /// Field name → internalField literal.
    #[serde(default)]
    pub initial_fields: BTreeMap<String, String>,
    /// Physical constants such as `nu`, keyed by name.
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
    #[serde(default)]
    pub free_text: String,
    #[serde(default)]
    pub source_ref: String,
}

impl CaseSpecification {
    pub fn new(name: &str, solver: &str, regime: FlowRegime) -> Self {
        CaseSpecification {
            name: name.to_string(),
            solver: solver.to_string(),
            turbulence_model: None,
            thermo_model: None,
            flow_regime: regime,
            time_mode: TimeMode::for_solver(solver),
            boundaries: BTreeMap::new(),
            initial_fields: BTreeMap::new(),
            properties: BTreeMap::new(),
            free_text: String::new(),
            source_ref: String::new(),
        }
    }

    pub fn patch_names(&self) -> BTreeSet<&str> {
        self.boundaries.keys().map(String::as_str).collect()
    }

    pub fn expected_type(&self, patch: &str, field: &str) -> Option<&str> {
        self.boundaries.get(patch)?.type_for(field)
    }

    /// Structural checks that do not need a mesh: patch names and catalog spelling.
    pub fn check(&self) -> Result<(), String> {
        if self.solver.trim().is_empty() {
            return Err("solver is empty".into());
        }
        if self.boundaries.is_empty() {
            return Err("no boundary patches".into());
        }
        for (patch, b) in &self.boundaries {
            if patch.is_empty() || patch.chars().any(char::is_whitespace) {
                return Err(format!("invalid patch name '{patch}'"));
            }
            for (_, t) in b.all_types() {
                if !catalog().contains(t) {
                    return Err(match catalog().suggest(t) {
                        Some(s) => format!("patch '{patch}': unknown boundary type '{t}' (did you mean '{s}'?)"),
                        None => format!("patch '{patch}': unknown boundary type '{t}'"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearMiss {
    pub patch: String,
    pub field: Option<String>,
    pub given: String,
    pub suggestion: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub missing_in_mesh: Vec<String>,
    pub missing_in_spec: Vec<String>,
    /// (patch, field, type) with a type absent from the catalog and no close match.
    pub unknown_types: Vec<(String, Option<String>, String)>,
    pub near_misses: Vec<NearMiss>,
    /// (patch, field, type) where the type does not apply to the field's class.
    pub inapplicable: Vec<(String, String, String)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing_in_mesh.is_empty()
            && self.missing_in_spec.is_empty()
            && self.unknown_types.is_empty()
            && self.near_misses.is_empty()
            && self.inapplicable.is_empty()
    }
}

pub fn validate_boundaries<'a, I>(spec: &CaseSpecification, mesh_patches: I) -> ValidationReport
where
    I: IntoIterator<Item = &'a str>,
{
    let mesh: BTreeSet<&str> = mesh_patches.into_iter().collect();
    let declared = spec.patch_names();
    let mut r = ValidationReport {
        missing_in_mesh: declared.difference(&mesh).map(|s| s.to_string()).collect(),
        missing_in_spec: mesh.difference(&declared).map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let cat = catalog();
    for (patch, b) in &spec.boundaries {
        for (field, t) in b.all_types() {
            if cat.contains(t) {
                if let Some(f) = field {
                    if !cat.applies_to(t, f) {
                        r.inapplicable.push((patch.clone(), f.to_string(), t.to_string()));
                    }
                }
                continue;
            }
            match cat.suggest(t) {
                Some(s) => r.near_misses.push(NearMiss {
                    patch: patch.clone(),
                    field: field.map(str::to_string),
                    given: t.to_string(),
                    suggestion: s.to_string(),
                }),
                None => r
                    .unknown_types
                    .push((patch.clone(), field.map(str::to_string), t.to_string())),
            }
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecViolation {
    TypeMismatch {
        path: String,
        patch: String,
        expected: String,
        found: String,
    },
    MissingPatch {
        path: String,
        patch: String,
    },
    UnexpectedPatch {
        path: String,
        patch: String,
    },
    Unreadable {
        path: String,
        message: String,
    },
}

/// Field files whose boundary patches or types depart from the specification.
pub fn spec_violations<'a, I>(spec: &CaseSpecification, files: I) -> Vec<SpecViolation>
where
    I: IntoIterator<Item = (&'a str, &'a FoamDictionary)>,
{
    let mut out = Vec::new();
    for (path, dict) in files {
        let Some(field) = path.strip_prefix("0/") else { continue };
        if field.contains('/') {
            continue;
        }
        let file = match FieldFile::from_dictionary_named(dict, field) {
            Ok(f) => f,
            Err(e) => {
                out.push(SpecViolation::Unreadable {
                    path: path.to_string(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        for patch in spec.boundaries.keys() {
            match file.patch_type(patch) {
                None => out.push(SpecViolation::MissingPatch {
                    path: path.to_string(),
                    patch: patch.clone(),
                }),
                Some(found) => {
                    if let Some(expected) = spec.expected_type(patch, field) {
                        if found != expected {
                            out.push(SpecViolation::TypeMismatch {
                                path: path.to_string(),
                                patch: patch.clone(),
                                expected: expected.to_string(),
                                found: found.to_string(),
                            });
                        }
                    }
                }
            }
        }
        for patch in file.patch_names() {
            if !spec.boundaries.contains_key(patch) {
                out.push(SpecViolation::UnexpectedPatch {
                    path: path.to_string(),
                    patch: patch.to_string(),
                });
            }
        }
    }
    out
}
