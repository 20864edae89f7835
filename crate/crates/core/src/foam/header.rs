use serde::{Deserialize, Serialize};

use super::value::{FoamDictionary, FoamValue, Number};
use super::FoamError;

pub const HEADER_KEYWORD: &str = "FoamFile";

/// Class names accepted in a `FoamFile` header.
pub const KNOWN_CLASSES: &[&str] = &[
    "dictionary",
    "volScalarField",
    "volVectorField",
    "volTensorField",
    "volSymmTensorField",
    "volSphericalTensorField",
    "surfaceScalarField",
    "surfaceVectorField",
    "pointScalarField",
    "pointVectorField",
    "uniformDimensionedScalarField",
    "uniformDimensionedVectorField",
    "polyBoundaryMesh",
    "faceList",
    "faceCompactList",
    "labelList",
    "vectorField",
    "scalarField",
    "cellZoneMesh",
    "faceZoneMesh",
    "pointZoneMesh",
    "regIOobject",
    "IOobject",
    "featureEdgeMesh",
    "edgeMesh",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoamHeader {
    pub version: String,
    pub format: String,
    pub class: String,
    pub object: String,
    pub location: Option<String>,
}

impl FoamHeader {
    /// Header for a case file, inferring the class from its location.
    pub fn for_case_path(rel_path: &str) -> Self {
        let (dir, object) = rel_path.rsplit_once('/').unwrap_or(("", rel_path));
        let class = if dir == "0" {
            if matches!(object, "U" | "Ub" | "Ua") {
                "volVectorField"
            } else {
                "volScalarField"
            }
        } else {
            "dictionary"
        };
        FoamHeader {
            version: "2.0".into(),
            format: "ascii".into(),
            class: class.into(),
            object: object.into(),
            location: (!dir.is_empty()).then(|| dir.to_string()),
        }
    }

    pub fn from_dictionary(d: &FoamDictionary) -> Result<Self, FoamError> {
        let text = |k: &str| -> Option<String> {
            match d.get(k)? {
                FoamValue::Word(w) | FoamValue::Str(w) => Some(w.clone()),
                FoamValue::Number(n) => Some(n.as_str().to_string()),
                _ => None,
            }
        };
        let class = text("class").ok_or_else(|| FoamError::Header("missing 'class'".into()))?;
        if !KNOWN_CLASSES.contains(&class.as_str()) {
            return Err(FoamError::Header(format!("unknown class '{class}'")));
        }
        Ok(FoamHeader {
            version: text("version").unwrap_or_else(|| "2.0".into()),
            format: text("format").unwrap_or_else(|| "ascii".into()),
            class,
            object: text("object").ok_or_else(|| FoamError::Header("missing 'object'".into()))?,
            location: text("location"),
        })
    }

    pub fn to_dictionary(&self) -> FoamDictionary {
        let mut d = FoamDictionary::new();
        let version = if self.version.parse::<f64>().is_ok() {
            FoamValue::Number(Number::new(self.version.clone()))
        } else {
            FoamValue::Word(self.version.clone())
        };
        d.set("version", version);
        d.set("format", FoamValue::word(&self.format));
        d.set("class", FoamValue::word(&self.class));
        if let Some(loc) = &self.location {
            d.set("location", FoamValue::Str(loc.clone()));
        }
        d.set("object", FoamValue::word(&self.object));
        d
    }
}

impl FoamDictionary {
    pub fn header(&self) -> Option<Result<FoamHeader, FoamError>> {
        self.get_dict(HEADER_KEYWORD).map(FoamHeader::from_dictionary)
    }

    pub fn has_header(&self) -> bool {
        self.contains_key(HEADER_KEYWORD)
    }

    pub fn set_header(&mut self, header: &FoamHeader) {
        self.insert_front(HEADER_KEYWORD, FoamValue::Dict(header.to_dictionary()));
    }

    pub fn strip_header(&mut self) -> Option<FoamDictionary> {
        match self.remove(HEADER_KEYWORD) {
            Some(FoamValue::Dict(d)) => Some(d),
            _ => None,
        }
    }

    pub fn without_header(&self) -> FoamDictionary {
        let mut d = self.clone();
        d.strip_header();
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foam::{parse_dictionary, serialize_dictionary};

    #[test]
    fn header_parses_and_validates_class() {
        let d = parse_dictionary(
            "FoamFile { version 2.0; format ascii; class volScalarField; location \"0\"; object p; }",
        )
        .unwrap();
        let h = d.header().unwrap().unwrap();
        assert_eq!(h.class, "volScalarField");
        assert_eq!(h.location.as_deref(), Some("0"));

        let bad = parse_dictionary("FoamFile { version 2.0; format ascii; class fooField; object p; }").unwrap();
        assert!(matches!(bad.header(), Some(Err(FoamError::Header(_)))));
    }

    #[test]
    fn strip_then_serialize_has_no_banner() {
        let src = "/*--------------------------------*- C++ -*----------------------------------*\\\n\
                   | =========                 |                                                 |\n\
                   \\*---------------------------------------------------------------------------*/\n\
                   FoamFile { version 2.0; format ascii; class dictionary; object controlDict; }\n\
                   // * * * * * //\napplication simpleFoam;\n";
        let mut d = parse_dictionary(src).unwrap();
        assert!(d.strip_header().is_some());
        let out = serialize_dictionary(&d);
        assert!(!out.contains("FoamFile") && !out.contains("/*") && !out.contains("//"));
        assert_eq!(out, "application     simpleFoam;\n");
    }

    #[test]
    fn inferred_header_classes() {
        assert_eq!(FoamHeader::for_case_path("0/U").class, "volVectorField");
        assert_eq!(FoamHeader::for_case_path("0/p").class, "volScalarField");
        let h = FoamHeader::for_case_path("system/fvSchemes");
        assert_eq!((h.class.as_str(), h.location.as_deref()), ("dictionary", Some("system")));
    }

    #[test]
    fn set_header_round_trips() {
        let mut d = parse_dictionary("a 1;").unwrap();
        let h = FoamHeader::for_case_path("0/nut");
        d.set_header(&h);
        let back = parse_dictionary(&serialize_dictionary(&d)).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.header().unwrap().unwrap(), h);
    }
}
