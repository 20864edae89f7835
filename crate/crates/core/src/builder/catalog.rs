use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldClass {
    Scalar,
    Vector,
}

impl FieldClass {
    pub fn of(field: &str) -> FieldClass {
        match field {
            "U" | "Urel" | "Uabs" => FieldClass::Vector,
            _ => FieldClass::Scalar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Applicability {
    /// Geometric constraint types; also valid as polyMesh patch types.
    Constraint,
    Any,
    Only(FieldClass),
}

#[derive(Deserialize)]
struct RawCatalog {
    constraint: Vec<String>,
    any: Vec<String>,
    vector: Vec<String>,
    scalar: Vec<String>,
}

/// Boundary-condition type names known to OpenFOAM v2406, with the field
/// classes each applies to. Lookups are case-sensitive.
#[derive(Debug)]
pub struct BoundaryCatalog {
    types: BTreeMap<String, Applicability>,
}

pub fn catalog() -> &'static BoundaryCatalog {
    static CAT: OnceLock<BoundaryCatalog> = OnceLock::new();
    CAT.get_or_init(|| {
        let raw: RawCatalog =
            serde_json::from_str(include_str!("../../data/bc_catalog.json")).expect("bundled catalog is valid");
        let mut types = BTreeMap::new();
        for n in raw.constraint {
            types.insert(n, Applicability::Constraint);
        }
        for n in raw.any {
            types.insert(n, Applicability::Any);
        }
        for n in raw.vector {
            types.insert(n, Applicability::Only(FieldClass::Vector));
        }
        for n in raw.scalar {
            types.insert(n, Applicability::Only(FieldClass::Scalar));
        }
        BoundaryCatalog { types }
    })
}

impl BoundaryCatalog {
    pub fn contains(&self, bc_type: &str) -> bool {
        self.types.contains_key(bc_type)
    }

    pub fn is_constraint(&self, bc_type: &str) -> bool {
        self.types.get(bc_type) == Some(&Applicability::Constraint)
    }

    pub fn applies_to(&self, bc_type: &str, field: &str) -> bool {
        match self.types.get(bc_type) {
            Some(Applicability::Constraint | Applicability::Any) => true,
            Some(Applicability::Only(c)) => *c == FieldClass::of(field),
            None => false,
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.types.keys().map(String::as_str)
    }

    /// Closest catalog spelling for a name that is not in the catalog:
    /// a case-insensitive match, or a single small edit away.
    pub fn suggest(&self, bc_type: &str) -> Option<&str> {
        if self.contains(bc_type) {
            return None;
        }
        if let Some(n) = self.names().find(|n| n.eq_ignore_ascii_case(bc_type)) {
            return Some(n);
        }
        let lower = bc_type.to_ascii_lowercase();
        self.names()
            .map(|n| (strsim::damerau_levenshtein(&lower, &n.to_ascii_lowercase()), n))
            .filter(|(d, n)| *d <= 2 && *d * 4 <= n.len())
            .min()
            .map(|(_, n)| n)
    }
}
