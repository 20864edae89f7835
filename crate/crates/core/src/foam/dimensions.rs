use std::fmt;

use serde::{Deserialize, Serialize};

use super::field::FieldFile;
use super::FoamError;

/// SI exponents in OpenFOAM order: mass, length, time, temperature,
/// moles, current, luminous intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DimensionVector(pub [i32; 7]);

impl DimensionVector {
    pub const DIMLESS: Self = DimensionVector([0; 7]);
    pub const VELOCITY: Self = DimensionVector([0, 1, -1, 0, 0, 0, 0]);
    pub const KINEMATIC_PRESSURE: Self = DimensionVector([0, 2, -2, 0, 0, 0, 0]);
    pub const PRESSURE: Self = DimensionVector([1, -1, -2, 0, 0, 0, 0]);
    pub const TEMPERATURE: Self = DimensionVector([0, 0, 0, 1, 0, 0, 0]);
    pub const KINEMATIC_VISCOSITY: Self = DimensionVector([0, 2, -1, 0, 0, 0, 0]);
    pub const DYNAMIC_DIFFUSIVITY: Self = DimensionVector([1, -1, -1, 0, 0, 0, 0]);
    pub const FREQUENCY: Self = DimensionVector([0, 0, -1, 0, 0, 0, 0]);
    pub const DISSIPATION: Self = DimensionVector([0, 2, -3, 0, 0, 0, 0]);

    pub fn is_dimensionless(&self) -> bool {
        self.0 == [0; 7]
    }

    /// Accepts OpenFOAM's 7-component form and the legacy 5-component one.
    pub fn from_slice(v: &[i32]) -> Option<Self> {
        match v.len() {
            7 => Some(DimensionVector(v.try_into().ok()?)),
            5 => {
                let mut e = [0; 7];
                e[..5].copy_from_slice(v);
                Some(DimensionVector(e))
            }
            _ => None,
        }
    }
}

impl fmt::Display for DimensionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.0;
        write!(f, "[{} {} {} {} {} {} {}]", e[0], e[1], e[2], e[3], e[4], e[5], e[6])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowRegime {
    Incompressible,
    Compressible,
    #[default]
    Unknown,
}

impl fmt::Display for FlowRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowRegime::Incompressible => "incompressible",
            FlowRegime::Compressible => "compressible",
            FlowRegime::Unknown => "unknown",
        })
    }
}

/// Fields whose canonical dimensions are known.
pub const SUPPORTED_FIELDS: [&str; 9] =
    ["p", "U", "T", "nut", "nuTilda", "k", "omega", "epsilon", "alphat"];

/// Canonical dimension set of a field. Incompressible solvers work with
/// kinematic pressure (p/rho), compressible ones with thermodynamic pressure.
pub fn expected_dimensions(field: &str, regime: FlowRegime) -> Result<DimensionVector, FoamError> {
    let compressible = match regime {
        FlowRegime::Incompressible => false,
        FlowRegime::Compressible => true,
        FlowRegime::Unknown => return Err(FoamError::UnresolvedRegime(field.to_string())),
    };
    let dims = match field {
        "p" if compressible => DimensionVector::PRESSURE,
        "p" => DimensionVector::KINEMATIC_PRESSURE,
        "U" => DimensionVector::VELOCITY,
        "T" => DimensionVector::TEMPERATURE,
        "nut" | "nuTilda" => DimensionVector::KINEMATIC_VISCOSITY,
        "k" => DimensionVector::KINEMATIC_PRESSURE,
        "omega" => DimensionVector::FREQUENCY,
        "epsilon" => DimensionVector::DISSIPATION,
        "alphat" if compressible => DimensionVector::DYNAMIC_DIFFUSIVITY,
        "alphat" => DimensionVector::KINEMATIC_VISCOSITY,
        other => return Err(FoamError::UnknownField(other.to_string())),
    };
    Ok(dims)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionMismatch {
    pub field: String,
    pub found: DimensionVector,
    pub expected: DimensionVector,
}

impl fmt::Display for DimensionMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field {}: dimensions {} but expected {}", self.field, self.found, self.expected)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub mismatches: Vec<DimensionMismatch>,
}

impl MismatchReport {
    pub fn is_empty(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn check_dimensions(file: &FieldFile, expected: DimensionVector) -> MismatchReport {
    let mut report = MismatchReport::default();
    if file.dimensions != expected {
        report.mismatches.push(DimensionMismatch {
            field: file.name.clone(),
            found: file.dimensions,
            expected,
        });
    }
    report
}
