use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::executor::Executor;
use super::RunError;
use crate::builder::{catalog, CaseSpecification};
use crate::foam::{parse_dictionary, serialize_dictionary, FoamDictionary, FoamHeader, FoamValue, Number};

pub const BOUNDARY_PATH: &str = "constant/polyMesh/boundary";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MshZone {
    pub id: u32,
    pub zone_type: String,
    pub name: String,
    /// Face count from the zone's face section, when present.
    pub faces: usize,
}

impl MshZone {
    /// Volume and interior zones are not boundary patches.
    pub fn is_boundary(&self) -> bool {
        !matches!(self.zone_type.as_str(), "fluid" | "solid" | "interior")
    }

    /// Patch type fluentMeshToFoam assigns for this zone type.
    pub fn patch_type(&self) -> &'static str {
        match self.zone_type.as_str() {
            "wall" => "wall",
            "symmetry" => "symmetryPlane",
            "axis" => "empty",
            _ => "patch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MshInfo {
    pub cells: usize,
    pub zones: Vec<MshZone>,
}

impl MshInfo {
    pub fn boundary_zones(&self) -> impl Iterator<Item = &MshZone> {
        self.zones.iter().filter(|z| z.is_boundary())
    }
}

fn zone_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\((?:45|39)\s+\(\s*(\d+)\s+([A-Za-z][\w-]*)\s+([^\s()]+)").unwrap())
}

fn face_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(13\s+\(\s*([0-9a-fA-F]+)\s+([0-9a-fA-F]+)\s+([0-9a-fA-F]+)").unwrap())
}

fn cell_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(12\s+\(\s*0\s+([0-9a-fA-F]+)\s+([0-9a-fA-F]+)").unwrap())
}

/// Header scan of an ASCII Fluent mesh: zone declarations and counts. Node
/// and face connectivity are not read.
pub fn scan_fluent_msh(path: &Path) -> Result<MshInfo, RunError> {
    let conversion = |message: String| RunError::Conversion {
        exit_code: None,
        message,
    };
    if path.extension().and_then(|e| e.to_str()) != Some("msh") {
        return Err(conversion(format!("{}: not a Fluent .msh file", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| conversion(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8_lossy(&bytes);

    let hex = |s: &str| usize::from_str_radix(s, 16).unwrap_or(0);
    let mut faces: std::collections::BTreeMap<u32, usize> = Default::default();
    for c in face_re().captures_iter(&text) {
        let zone = hex(&c[1]) as u32;
        if zone == 0 {
            continue;
        }
        let (first, last) = (hex(&c[2]), hex(&c[3]));
        *faces.entry(zone).or_default() += last.saturating_sub(first) + 1;
    }
    let cells = cell_re()
        .captures(&text)
        .map(|c| hex(&c[2]).saturating_sub(hex(&c[1])) + 1)
        .unwrap_or(0);
    let mut zones: Vec<MshZone> = zone_re()
        .captures_iter(&text)
        .map(|c| {
            let id: u32 = c[1].parse().unwrap_or(0);
            MshZone {
                id,
                zone_type: c[2].to_string(),
                name: c[3].to_string(),
                faces: faces.get(&id).copied().unwrap_or(0),
            }
        })
        .collect();
    zones.sort_by_key(|z| z.id);
    zones.dedup_by_key(|z| z.id);
    if zones.iter().all(|z| !z.is_boundary()) {
        return Err(conversion(format!("{}: no boundary zones declared", path.display())));
    }
    Ok(MshInfo { cells, zones })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryPatch {
    pub name: String,
    pub patch_type: String,
    pub n_faces: usize,
    pub start_face: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshReport {
    pub patches: Vec<BoundaryPatch>,
    pub cell_count: usize,
}

impl MeshReport {
    pub fn patch_names(&self) -> impl Iterator<Item = &str> {
        self.patches.iter().map(|p| p.name.as_str())
    }
}

fn patch_list(d: &FoamDictionary) -> Option<&[FoamValue]> {
    let anon = d.anonymous()?;
    anon.items().iter().find_map(|v| match v {
        FoamValue::List(items) => Some(items.as_slice()),
        _ => None,
    })
}

/// Patches of `constant/polyMesh/boundary`, in file order.
pub fn read_boundary(case_dir: &Path) -> Result<Vec<BoundaryPatch>, RunError> {
    let path = case_dir.join(BOUNDARY_PATH);
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(path.display(), e))?;
    let d = parse_dictionary(&text).map_err(|e| RunError::io(path.display(), e))?;
    let items = patch_list(&d).ok_or_else(|| RunError::io(path.display(), "no patch list"))?;
    let mut out = Vec::new();
    for item in items {
        if let FoamValue::NamedDict(name, body) = item {
            out.push(BoundaryPatch {
                name: name.clone(),
                patch_type: body.get_word("type").unwrap_or("patch").to_string(),
                n_faces: body.get_f64("nFaces").unwrap_or(0.0) as usize,
                start_face: body.get_f64("startFace").unwrap_or(0.0) as usize,
            });
        }
    }
    Ok(out)
}

pub fn write_boundary(case_dir: &Path, patches: &[BoundaryPatch]) -> Result<(), RunError> {
    let mut d = FoamDictionary::new();
    d.set_header(&FoamHeader {
        version: "2.0".into(),
        format: "ascii".into(),
        class: "polyBoundaryMesh".into(),
        object: "boundary".into(),
        location: Some("constant/polyMesh".into()),
    });
    let items = patches
        .iter()
        .map(|p| {
            let mut body = FoamDictionary::new();
            body.set("type", FoamValue::word(&p.patch_type));
            body.set("nFaces", FoamValue::Number(Number::from_i64(p.n_faces as i64)));
            body.set("startFace", FoamValue::Number(Number::from_i64(p.start_face as i64)));
            FoamValue::NamedDict(p.name.clone(), body)
        })
        .collect();
    d.push_anonymous(FoamValue::Seq(vec![
        FoamValue::Number(Number::from_i64(patches.len() as i64)),
        FoamValue::List(items),
    ]));
    let path = case_dir.join(BOUNDARY_PATH);
    std::fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| RunError::io(path.display(), e))?;
    std::fs::write(&path, serialize_dictionary(&d)).map_err(|e| RunError::io(path.display(), e))
}

fn cell_count_from_owner(case_dir: &Path) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"nCells:\s*(\d+)").unwrap());
    let text = std::fs::read_to_string(case_dir.join("constant/polyMesh/owner")).ok()?;
    re.captures(&text)?[1].parse().ok()
}

/// Converts a Fluent mesh into `constant/polyMesh` and reports its patches.
pub fn convert_mesh(msh: &Path, case_dir: &Path, executor: &dyn Executor) -> Result<MeshReport, RunError> {
    if !msh.is_file() {
        return Err(RunError::Conversion {
            exit_code: None,
            message: format!("{}: no such mesh file", msh.display()),
        });
    }
    let run = executor.convert_mesh(msh, case_dir)?;
    if run.exit_code != Some(0) {
        return Err(RunError::Conversion {
            exit_code: run.exit_code,
            message: run.tail(20),
        });
    }
    let patches = read_boundary(case_dir).map_err(|e| RunError::Conversion {
        exit_code: run.exit_code,
        message: e.to_string(),
    })?;
    let cell_count = cell_count_from_owner(case_dir)
        .or_else(|| scan_fluent_msh(msh).ok().map(|i| i.cells))
        .unwrap_or(0);
    Ok(MeshReport { patches, cell_count })
}

/// Sets constraint patch types (empty, symmetryPlane, wedge, …) in
/// polyMesh/boundary to the ones the specification assigns, since the
/// converter cannot know them. Returns the patches changed.
pub fn align_patch_types(case_dir: &Path, spec: &CaseSpecification) -> Result<Vec<String>, RunError> {
    let mut patches = read_boundary(case_dir)?;
    let cat = catalog();
    let mut changed = Vec::new();
    for p in patches.iter_mut() {
        let Some(b) = spec.boundaries.get(&p.name) else { continue };
        let wanted = b
            .bc_type
            .as_deref()
            .into_iter()
            .chain(b.field_types.values().map(String::as_str))
            .find(|t| cat.is_constraint(t));
        if let Some(t) = wanted {
            if p.patch_type != t {
                p.patch_type = t.to_string();
                changed.push(p.name.clone());
            }
        }
    }
    if !changed.is_empty() {
        write_boundary(case_dir, &patches)?;
    }
    Ok(changed)
}
