use indexmap::IndexMap;

use super::dimensions::DimensionVector;
use super::header::FoamHeader;
use super::value::{Entry, FoamDictionary, FoamValue};
use super::FoamError;

/// Typed view of a `0/<field>` file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub name: String,
    pub header: Option<FoamHeader>,
    pub dimensions: DimensionVector,
    pub internal_field: FoamValue,
    pub boundary_field: IndexMap<String, FoamDictionary>,
}

impl FieldFile {
    pub fn from_dictionary(d: &FoamDictionary) -> Result<Self, FoamError> {
        let header = d.header().transpose()?;
        let name = header
            .as_ref()
            .map(|h| h.object.clone())
            .ok_or_else(|| FoamError::Field("field file has no header naming the field".into()))?;
        Self::build(d, name, header)
    }

    /// For header-less text where the field name comes from the file path.
    pub fn from_dictionary_named(d: &FoamDictionary, name: &str) -> Result<Self, FoamError> {
        let header = d.header().transpose()?;
        Self::build(d, name.to_string(), header)
    }

    fn build(d: &FoamDictionary, name: String, header: Option<FoamHeader>) -> Result<Self, FoamError> {
        let dimensions = match d.get("dimensions") {
            Some(FoamValue::Dimensions(v)) => *v,
            Some(_) => return Err(FoamError::Field(format!("{name}: 'dimensions' is not a dimension set"))),
            None => return Err(FoamError::Field(format!("{name}: missing 'dimensions'"))),
        };
        let internal_field = d
            .get("internalField")
            .cloned()
            .ok_or_else(|| FoamError::Field(format!("{name}: missing 'internalField'")))?;
        let bf = d
            .get_dict("boundaryField")
            .ok_or_else(|| FoamError::Field(format!("{name}: missing 'boundaryField'")))?;
        let mut boundary_field = IndexMap::new();
        for e in bf.entries() {
            if let Entry::Keyed { keyword, value } = e {
                let patch = value
                    .as_dict()
                    .ok_or_else(|| FoamError::Field(format!("{name}: patch '{keyword}' is not a dictionary")))?;
                if !patch.contains_key("type") {
                    return Err(FoamError::MissingPatchType {
                        field: name.clone(),
                        patch: keyword.clone(),
                    });
                }
                boundary_field.insert(keyword.clone(), patch.clone());
            }
        }
        Ok(FieldFile {
            name,
            header,
            dimensions,
            internal_field,
            boundary_field,
        })
    }

    pub fn patch_names(&self) -> impl Iterator<Item = &str> {
        self.boundary_field.keys().map(String::as_str)
    }

    pub fn patch_type(&self, patch: &str) -> Option<&str> {
        self.boundary_field.get(patch).and_then(|d| d.get_word("type"))
    }

    pub fn to_dictionary(&self) -> FoamDictionary {
        let mut d = FoamDictionary::new();
        if let Some(h) = &self.header {
            d.set_header(h);
        }
        d.set("dimensions", FoamValue::Dimensions(self.dimensions));
        d.set("internalField", self.internal_field.clone());
        let bf: FoamDictionary = self
            .boundary_field
            .iter()
            .map(|(k, v)| (k.clone(), FoamValue::Dict(v.clone())))
            .collect();
        d.set("boundaryField", FoamValue::Dict(bf));
        d
    }
}

/// Patch-name → `type` pairs of a field dictionary, without requiring the
/// whole file to be well-formed.
pub fn boundary_types(d: &FoamDictionary) -> Vec<(String, Option<String>)> {
    d.get_dict("boundaryField")
        .map(|bf| {
            bf.keyed()
                .map(|(k, v)| (k.to_string(), v.as_dict().and_then(|p| p.get_word("type")).map(str::to_string)))
                .collect()
        })
        .unwrap_or_default()
}
