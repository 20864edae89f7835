//! Start-up checks and log output of the simulated executor. The checks
//! mirror what an OpenFOAM solver reads before its first step, and failures
//! are reported with the solver's own fatal-error wording.

use std::collections::BTreeMap;
use std::path::Path;

use super::mesh::read_boundary;
use super::RunError;
use crate::builder::catalog;
use crate::foam::{expected_dimensions, format_scalar, parse_dictionary, FieldFile, FlowRegime, FoamDictionary, SUPPORTED_FIELDS};
use crate::kb::{is_steady_solver, thermo_model, turbulence_model, KnowledgeBase, COMPRESSIBLE_SOLVERS};

/// Longest simulated run, whatever controlDict asks for.
const MAX_SIM_STEPS: u64 = 1000;

fn banner(solver: &str, case_dir: &Path) -> String {
    format!(
        "/*---------------------------------------------------------------------------*\\\n\
         | =========                 |                                                 |\n\
         | \\\\      /  F ield         | OpenFOAM: The Open Source CFD Toolbox           |\n\
         |  \\\\    /   O peration     | Version:  v2406                                 |\n\
         |   \\\\  /    A nd           | Website:  www.openfoam.com                      |\n\
         |    \\\\/     M anipulation  |                                                 |\n\
         \\*---------------------------------------------------------------------------*/\n\
         Build  : _v2406 OPENFOAM=2406\n\
         Exec   : {solver}\n\
         Case   : {}\n\
         nProcs : 1\n\n\
         Create time\n\n\
         Create mesh for time = 0\n\n",
        case_dir.display()
    )
}

fn fatal_io(head: &str, message: &str, file: &str, origin: &str) -> String {
    format!(
        "{head}\n\n--> FOAM FATAL IO ERROR: (openfoam-2406)\n{message}\n\nfile: {file} at line 0.\n\n    From {origin}\n\nFOAM exiting\n\n"
    )
}

fn fatal(head: &str, message: &str, origin: &str) -> String {
    format!("{head}\n\n--> FOAM FATAL ERROR: (openfoam-2406)\n{message}\n\n    From {origin}\n\nFOAM exiting\n\n")
}

fn missing_file(head: &str, abs: &Path) -> String {
    fatal_io(
        head,
        &format!("cannot find file \"{}\"", abs.display()),
        &abs.display().to_string(),
        "virtual Foam::autoPtr<Foam::ISstream> Foam::fileOperations::uncollatedFileOperation::readStream(Foam::regIOobject&, const Foam::fileName&, const Foam::word&, bool) const",
    )
}

fn read_case_files(case_dir: &Path) -> BTreeMap<String, Result<FoamDictionary, String>> {
    let mut out = BTreeMap::new();
    for dir in ["0", "constant", "system"] {
        let Ok(entries) = std::fs::read_dir(case_dir.join(dir)) else { continue };
        for e in entries.flatten() {
            if !e.path().is_file() {
                continue;
            }
            let rel = format!("{dir}/{}", e.file_name().to_string_lossy());
            let parsed = std::fs::read_to_string(e.path())
                .map_err(|err| err.to_string())
                .and_then(|t| parse_dictionary(&t).map_err(|err| err.to_string()));
            out.insert(rel, parsed);
        }
    }
    out
}

/// Divergence terms the solver's equations ask for.
fn required_div_terms(solver: &str, model: Option<&str>) -> Vec<String> {
    // central-scheme solvers reconstruct fluxes instead of convecting U
    let mut terms = Vec::new();
    if solver != "rhoCentralFoam" {
        terms.push("div(phi,U)".to_string());
    }
    let fields: &[&str] = match model {
        Some("SpalartAllmaras") => &["nuTilda"],
        Some("kOmegaSST") | Some("kOmega") => &["k", "omega"],
        Some("kEpsilon") | Some("realizableKE") | Some("RNGkEpsilon") => &["k", "epsilon"],
        _ => &[],
    };
    terms.extend(fields.iter().map(|f| format!("div(phi,{f})")));
    terms
}

/// Checks a deployed case the way solver start-up would; the error is the
/// log a real run would end with.
pub fn lint_case(case_dir: &Path, solver: &str) -> Result<(), String> {
    let head = banner(solver, case_dir);
    let files = read_case_files(case_dir);
    let abs = |rel: &str| case_dir.join(rel);

    for rel in ["system/controlDict", "system/fvSchemes", "system/fvSolution"] {
        match files.get(rel) {
            None => return Err(missing_file(&head, &abs(rel))),
            Some(Err(e)) => {
                return Err(fatal_io(&head, e, &abs(rel).display().to_string(), "Foam::dictionary::read(Foam::Istream&)"))
            }
            Some(Ok(_)) => {}
        }
    }
    let mesh = match read_boundary(case_dir) {
        Ok(p) => p,
        Err(_) => return Err(missing_file(&head, &abs("constant/polyMesh/boundary"))),
    };

    let parsed: BTreeMap<String, FoamDictionary> = files
        .iter()
        .filter_map(|(k, v)| v.as_ref().ok().map(|d| (k.clone(), d.without_header())))
        .collect();
    let model = turbulence_model(&parsed);
    let thermo = thermo_model(&parsed);
    let compressible = thermo.is_some() || COMPRESSIBLE_SOLVERS.contains(&solver);
    let regime = if compressible { FlowRegime::Compressible } else { FlowRegime::Incompressible };

    if let Ok(required) = KnowledgeBase::default().required_files(solver, model.as_deref(), thermo.as_deref()) {
        for rel in required.iter() {
            // either name of the thermophysical dictionary is accepted
            let alias = match rel {
                "constant/thermodynamicProperties" => "constant/thermophysicalProperties",
                other => other,
            };
            if !files.contains_key(rel) && !files.contains_key(alias) {
                return Err(missing_file(&head, &abs(rel)));
            }
        }
    }
    for (rel, parsed) in &files {
        if let Err(e) = parsed {
            return Err(fatal_io(&head, e, &abs(rel).display().to_string(), "Foam::dictionary::read(Foam::Istream&)"));
        }
    }

    let cat = catalog();
    for (rel, d) in files.iter().filter_map(|(k, v)| Some((k, v.as_ref().ok()?))) {
        let Some(field) = rel.strip_prefix("0/") else { continue };
        if !SUPPORTED_FIELDS.contains(&field) {
            continue;
        }
        let ff = FieldFile::from_dictionary_named(d, field).map_err(|e| {
            fatal_io(&head, &e.to_string(), &abs(rel).display().to_string(), "Foam::GeometricField::readFields(const Foam::dictionary&)")
        })?;
        let expected = expected_dimensions(field, regime).expect("regime resolved");
        if ff.dimensions != expected {
            return Err(fatal(
                &head,
                &format!("Different dimensions for ({field} = {field})\n     dimensions : {} = {}", ff.dimensions, expected),
                "bool Foam::operator==(const Foam::dimensionSet&, const Foam::dimensionSet&)",
            ));
        }
        for p in &mesh {
            let Some(t) = ff.patch_type(&p.name) else {
                return Err(fatal_io(
                    &head,
                    &format!("Cannot find patchField entry for {}", p.name),
                    &format!("{}/boundaryField", abs(rel).display()),
                    "void Foam::GeometricBoundaryField::readField(const Foam::DimensionedField&, const Foam::dictionary&)",
                ));
            };
            if !cat.contains(t) {
                return Err(fatal_io(
                    &head,
                    &format!("Unknown patchField type {t} for patch {} of field {field}", p.name),
                    &format!("{}/boundaryField/{}", abs(rel).display(), p.name),
                    "static Foam::tmp<Foam::fvPatchField<Type>> Foam::fvPatchField<Type>::New(...)",
                ));
            }
            if cat.is_constraint(t) && t != p.patch_type {
                return Err(fatal_io(
                    &head,
                    &format!("patch type '{}' not constraint type '{t}'\n    for patch {} of field {field}", p.patch_type, p.name),
                    &format!("{}/boundaryField/{}", abs(rel).display(), p.name),
                    "Foam::emptyFvPatchField<Type>::emptyFvPatchField(...)",
                ));
            }
        }
    }

    let schemes = files["system/fvSchemes"].as_ref().expect("checked above");
    let div = schemes.get_dict("divSchemes");
    let has_default = div
        .and_then(|d| d.get("default"))
        .map(|v| v.items().first().and_then(|f| f.as_word()) != Some("none"))
        .unwrap_or(false);
    if !has_default {
        for term in required_div_terms(solver, model.as_deref()) {
            if div.and_then(|d| d.get(&term)).is_none() {
                return Err(fatal_io(
                    &head,
                    &format!("Entry '{term}' not found in dictionary \"{}/divSchemes\"", abs("system/fvSchemes").display()),
                    &format!("{}/divSchemes", abs("system/fvSchemes").display()),
                    "const Foam::entry& Foam::dictionary::lookupEntry(const Foam::word&, Foam::keyType::option) const",
                ));
            }
        }
    }
    Ok(())
}

/// Step times a controlDict produces, and the subset that is written.
pub(crate) fn schedule(control: &FoamDictionary) -> (Vec<f64>, Vec<f64>) {
    let dt = control.get_f64("deltaT").unwrap_or(1.0);
    let end = control.get_f64("endTime").unwrap_or(0.0);
    let start = control.get_f64("startTime").unwrap_or(0.0);
    let steps = (((end - start) / dt).round().max(0.0) as u64).min(MAX_SIM_STEPS);
    let interval = control.get_f64("writeInterval").unwrap_or(1.0);
    let every = match control.get_word("writeControl").unwrap_or("timeStep") {
        "timeStep" => interval.round().max(1.0) as u64,
        _ => (interval / dt).round().max(1.0) as u64,
    };
    let times: Vec<f64> = (1..=steps).map(|i| start + i as f64 * dt).collect();
    let writes = (1..=steps).filter(|i| i % every == 0).map(|i| start + i as f64 * dt).collect();
    (times, writes)
}

/// Log of a clean run over the controlDict's steps; copies the initial
/// fields into each write time.
pub(crate) fn simulate_success(case_dir: &Path, solver: &str) -> Result<String, RunError> {
    let control_path = case_dir.join("system/controlDict");
    let control = std::fs::read_to_string(&control_path)
        .ok()
        .and_then(|t| parse_dictionary(&t).ok())
        .unwrap_or_default();
    let (times, writes) = schedule(&control);
    let steady = is_steady_solver(solver);
    let fields: Vec<_> = std::fs::read_dir(case_dir.join("0"))
        .map(|rd| rd.flatten().filter(|e| e.path().is_file()).collect())
        .unwrap_or_default();

    let mut log = banner(solver, case_dir);
    log.push_str(if steady { "SIMPLE: convergence criteria\n\n" } else { "PIMPLE: no residual control data found\n\n" });
    log.push_str("Starting time loop\n\n");
    for (i, t) in times.iter().enumerate() {
        let name = format_scalar(*t);
        if !steady {
            log.push_str("Courant Number mean: 0.0123 max: 0.4321\n");
        }
        log.push_str(&format!("Time = {name}\n\n"));
        let r = 1.0 / (i as f64 + 2.0);
        log.push_str(&format!(
            "smoothSolver:  Solving for Ux, Initial residual = {}, Final residual = {}, No Iterations 2\n",
            format_scalar(r),
            format_scalar(r / 20.0)
        ));
        log.push_str(&format!(
            "GAMG:  Solving for p, Initial residual = {}, Final residual = {}, No Iterations 5\n",
            format_scalar(r),
            format_scalar(r / 50.0)
        ));
        log.push_str(&format!("ExecutionTime = {} s  ClockTime = {} s\n\n", format_scalar(0.05 * (i + 1) as f64), i / 10));
        if writes.contains(t) {
            let dir = case_dir.join(&name);
            std::fs::create_dir_all(&dir).map_err(|e| RunError::io(dir.display(), e))?;
            for f in &fields {
                std::fs::copy(f.path(), dir.join(f.file_name())).map_err(|e| RunError::io(dir.display(), e))?;
            }
        }
    }
    log.push_str("End\n\n");
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_schedule() {
        let d = parse_dictionary("deltaT 1; startTime 0; endTime 10; writeControl timeStep; writeInterval 5;").unwrap();
        let (times, writes) = schedule(&d);
        assert_eq!(times.len(), 10);
        assert_eq!(writes, vec![5.0, 10.0]);
    }

    #[test]
    fn transient_schedule_names() {
        let d = parse_dictionary("deltaT 1e-08; endTime 1e-07; writeControl runTime; writeInterval 5e-08;").unwrap();
        let (times, writes) = schedule(&d);
        assert_eq!(times.len(), 10);
        let names: Vec<String> = writes.iter().map(|t| format_scalar(*t)).collect();
        assert_eq!(names, ["5e-8", "1e-7"]);
    }
}
