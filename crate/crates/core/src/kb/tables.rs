use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::RequiredFileSet;

#[derive(Debug, Deserialize)]
pub(crate) struct SeedTables {
    pub solvers: BTreeMap<String, Vec<String>>,
    pub models: BTreeMap<String, Vec<String>>,
    pub thermo: BTreeMap<String, Vec<String>>,
    pub compressible_turbulence: Vec<String>,
}

pub(crate) fn seeds() -> &'static SeedTables {
    static SEEDS: OnceLock<SeedTables> = OnceLock::new();
    SEEDS.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/required_files.json")).expect("bundled seed table is valid")
    })
}

pub(crate) fn seed_set(paths: &[String]) -> RequiredFileSet {
    RequiredFileSet::from_paths(paths.iter().cloned()).expect("bundled seed paths are valid")
}

pub const COMPRESSIBLE_SOLVERS: &[&str] = &[
    "rhoCentralFoam",
    "rhoSimpleFoam",
    "rhoPimpleFoam",
    "rhoPorousSimpleFoam",
    "sonicFoam",
    "buoyantSimpleFoam",
    "buoyantPimpleFoam",
    "reactingFoam",
    "chtMultiRegionFoam",
];

pub const INCOMPRESSIBLE_SOLVERS: &[&str] = &[
    "simpleFoam",
    "pimpleFoam",
    "pisoFoam",
    "icoFoam",
    "SRFSimpleFoam",
    "porousSimpleFoam",
    "nonNewtonianIcoFoam",
    "adjointShapeOptimizationFoam",
];

pub const STEADY_SOLVERS: &[&str] = &[
    "simpleFoam",
    "rhoSimpleFoam",
    "buoyantSimpleFoam",
    "porousSimpleFoam",
    "SRFSimpleFoam",
    "rhoPorousSimpleFoam",
    "potentialFoam",
    "laplacianFoam",
];

/// Transient solvers that read `maxCo` from controlDict.
pub const MAX_CO_SOLVERS: &[&str] = &[
    "pimpleFoam",
    "rhoPimpleFoam",
    "rhoCentralFoam",
    "sonicFoam",
    "interFoam",
    "buoyantPimpleFoam",
    "reactingFoam",
];

/// Fields owned by a turbulence model rather than by the solver.
pub const TURBULENCE_FIELDS: &[&str] = &[
    "nut", "nuTilda", "k", "omega", "epsilon", "alphat", "kl", "kt", "nuSgs", "R", "v2", "f", "ReThetat",
    "gammaInt", "mut",
];

/// Meshing and utility dictionaries that never belong to a required-file set.
pub const UTILITY_DICTS: &[&str] = &[
    "blockMeshDict",
    "snappyHexMeshDict",
    "surfaceFeatureExtractDict",
    "surfaceFeaturesDict",
    "decomposeParDict",
    "extrudeMeshDict",
    "topoSetDict",
    "createPatchDict",
    "mapFieldsDict",
    "setFieldsDict",
    "meshQualityDict",
    "sampleDict",
    "refineMeshDict",
    "mirrorMeshDict",
    "changeDictionaryDict",
    "createBafflesDict",
    "foamDataToFluentDict",
];

/// Subdirectories of `constant/` that hold mesh or geometry data.
pub const MESH_DIRS: &[&str] = &["polyMesh", "triSurface", "geometry", "extendedFeatureEdgeMesh"];

pub fn is_steady_solver(solver: &str) -> bool {
    STEADY_SOLVERS.contains(&solver)
}
