use std::path::{Path, PathBuf};

use super::{RunConfig, RunError};
use crate::builder::{CaseSpecification, GeneratedCase, TimeMode};
use crate::foam::{parse_dictionary, serialize_dictionary, FoamDictionary, FoamHeader, FoamValue};
use crate::kb::MAX_CO_SOLVERS;

/// Serializes one dictionary to `case_dir/rel`, adding a header if absent.
pub fn write_file(case_dir: &Path, rel: &str, dict: &FoamDictionary) -> Result<(), RunError> {
    let path = case_dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent.display(), e))?;
    }
    let mut d = dict.clone();
    if !d.has_header() {
        d.set_header(&FoamHeader::for_case_path(rel));
    }
    std::fs::write(&path, serialize_dictionary(&d)).map_err(|e| RunError::io(path.display(), e))
}

/// Writes every generated file under `case_dir`, which must be absent or empty.
pub fn deploy_case(generated: &GeneratedCase, case_dir: &Path) -> Result<PathBuf, RunError> {
    if generated.files.is_empty() {
        return Err(RunError::EmptyCase);
    }
    if case_dir.exists() {
        let mut entries = std::fs::read_dir(case_dir).map_err(|e| RunError::io(case_dir.display(), e))?;
        if entries.next().is_some() {
            return Err(RunError::DirNotEmpty(case_dir.display().to_string()));
        }
    }
    std::fs::create_dir_all(case_dir).map_err(|e| RunError::io(case_dir.display(), e))?;
    for (rel, d) in &generated.files {
        write_file(case_dir, rel, d)?;
    }
    Ok(case_dir.to_path_buf())
}

/// Sets run length and output times in system/controlDict: ten steps with
/// writes every five, by iteration for steady solvers and by simulated time
/// for transient ones.
pub fn configure_temporal(case_dir: &Path, spec: &CaseSpecification, cfg: &RunConfig) -> Result<FoamDictionary, RunError> {
    let path = case_dir.join("system/controlDict");
    let text = std::fs::read_to_string(&path).map_err(|_| RunError::MissingControlDict)?;
    let mut d = parse_dictionary(&text).map_err(|e| RunError::io(path.display(), e))?;
    let steps = cfg.steady_steps as f64;
    let every = cfg.write_every as f64;

    d.set("application", FoamValue::word(&spec.solver));
    d.set("startFrom", FoamValue::word("startTime"));
    d.set("startTime", FoamValue::number(0.0));
    d.set("stopAt", FoamValue::word("endTime"));
    match spec.time_mode {
        TimeMode::Steady => {
            d.set("endTime", FoamValue::number(steps));
            d.set("deltaT", FoamValue::number(1.0));
            d.set("writeControl", FoamValue::word("timeStep"));
            d.set("writeInterval", FoamValue::number(every));
        }
        TimeMode::Transient => {
            let dt = if spec.flow_regime == crate::foam::FlowRegime::Compressible {
                cfg.delta_t_compressible
            } else {
                cfg.delta_t_incompressible
            };
            d.set("deltaT", FoamValue::number(dt));
            d.set("endTime", FoamValue::number(steps * dt));
            d.set("writeControl", FoamValue::word("runTime"));
            d.set("writeInterval", FoamValue::number(every * dt));
            if MAX_CO_SOLVERS.contains(&spec.solver.as_str()) {
                d.set("adjustTimeStep", FoamValue::word("no"));
                d.set("maxCo", FoamValue::number(cfg.max_courant));
            }
        }
    }
    std::fs::write(&path, serialize_dictionary(&d)).map_err(|e| RunError::io(path.display(), e))?;
    Ok(d)
}
