//! OpenFOAM dictionary format: parsing, canonical serialization, dimension
//! sets and typed field-file views.

mod dimensions;
mod field;
mod header;
mod lexer;
mod parser;
mod value;
mod write;

use thiserror::Error;

pub use dimensions::{
    check_dimensions, expected_dimensions, DimensionMismatch, DimensionVector, FlowRegime, MismatchReport,
    SUPPORTED_FIELDS,
};
pub use field::{boundary_types, FieldFile};
pub use header::{FoamHeader, HEADER_KEYWORD, KNOWN_CLASSES};
pub use parser::parse_dictionary;
pub use value::{format_scalar, Dimensioned, Entry, FoamDictionary, FoamValue, NonuniformField, Number};
pub use write::serialize_dictionary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoamError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown field '{0}'")]
    UnknownField(String),
    #[error("flow regime must be resolved before looking up dimensions of '{0}'")]
    UnresolvedRegime(String),
    #[error("bad FoamFile header: {0}")]
    Header(String),
    #[error("malformed field file: {0}")]
    Field(String),
    #[error("field {field}: patch '{patch}' has no 'type'")]
    MissingPatchType { field: String, patch: String },
}

/// Parses text and immediately re-serializes it; handy for normalizing
/// LLM output before comparing.
pub fn normalize(text: &str) -> Result<String, SyntaxError> {
    parse_dictionary(text).map(|d| serialize_dictionary(&d))
}
